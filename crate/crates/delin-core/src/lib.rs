//! Delineation of curvilinear networks from tubularity maps.
//!
//! The pipeline turns a per-pixel "tubularity" probability map into a
//! vectorized geometric graph:
//!
//! 1. **raster** – threshold the map and thin it to a one-pixel skeleton.
//! 2. **graph** – collect endpoints, intersections and regular grid samples
//!    as nodes, then connect every nearby pair with a shortest path over the
//!    tubularity cost surface (the overcomplete candidate graph).
//! 3. **astar** – the grid search itself, with an exact Dijkstra oracle.
//! 4. **scoring** – assign each candidate edge a validity score (built-in
//!    tubularity statistics or an external classifier process) and prune.
//! 5. **samples** – generate labeled path samples for classifier training.
//! 6. **metrics** – topology-aware evaluation against a ground-truth graph:
//!    Normalized Path Difference and topological precision/recall.
//! 7. **synth** – seeded synthetic networks for fixtures and end-to-end runs.

pub mod astar;
pub mod graph;
pub mod metrics;
pub mod raster;
pub mod samples;
pub mod scoring;
pub mod synth;

pub use astar::{PathResult, SearchOutcome, SearchParams};
pub use graph::{DelinGraph, Edge, ExtractParams, Node, NodeKind};
pub use metrics::{MatchTarget, MetricReport, NpdReport, TopoPr};
pub use raster::{BinaryMask, ScalarGrid, Skeleton};
pub use samples::{PathSample, SampleLabel, SampleParams};
pub use scoring::ScorerSpec;
pub use synth::SynthParams;
