//! Geometric graph types and the overcomplete-graph construction:
//! significant points, exclusion-zone grid sampling, candidate pairs and
//! A*-connected edges.

use std::collections::{HashMap, HashSet};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::astar::{self, Pixel, SearchParams};
use crate::raster::{neighbors8, ScalarGrid, Skeleton};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("invalid extract params: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Endpoint,
    Intersection,
    GridSample,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Endpoint => "endpoint",
            NodeKind::Intersection => "intersection",
            NodeKind::GridSample => "sample",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        match s {
            "endpoint" => Some(NodeKind::Endpoint),
            "intersection" => Some(NodeKind::Intersection),
            "sample" => Some(NodeKind::GridSample),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: u32,
    pub coord: Pixel,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub polyline: Vec<Pixel>,
    pub length: f64,
    pub cost: f64,
    pub score: Option<f64>,
}

/// Undirected geometric graph with pixel-polyline edges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelinGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl DelinGraph {
    pub fn node(&self, id: u32) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn degree(&self, id: u32) -> usize {
        self.edges.iter().filter(|e| e.u == id || e.v == id).count()
    }

    /// Structural checks: unique ids, valid edge endpoints, no self-loops or
    /// duplicate pairs, polylines anchored at their node coordinates.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(GraphError::Invalid(format!("duplicate node id {}", n.id)));
            }
        }
        let mut pairs = HashSet::new();
        for e in &self.edges {
            if e.u == e.v {
                return Err(GraphError::Invalid(format!("self-loop at node {}", e.u)));
            }
            if !ids.contains(&e.u) || !ids.contains(&e.v) {
                return Err(GraphError::Invalid(format!("edge ({},{}) references missing node", e.u, e.v)));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if !pairs.insert(key) {
                return Err(GraphError::Invalid(format!("duplicate edge ({},{})", key.0, key.1)));
            }
            if e.polyline.len() < 2 {
                return Err(GraphError::Invalid("edge polyline shorter than 2 pixels".into()));
            }
            let cu = self.node(e.u).unwrap().coord;
            let cv = self.node(e.v).unwrap().coord;
            let first = *e.polyline.first().unwrap();
            let last = *e.polyline.last().unwrap();
            if first != cu || last != cv {
                return Err(GraphError::Invalid(format!(
                    "edge ({},{}) polyline endpoints {:?}..{:?} do not match node coords {:?}..{:?}",
                    e.u, e.v, first, last, cu, cv
                )));
            }
            for w in e.polyline.windows(2) {
                let dx = (w[1].0 - w[0].0).abs();
                let dy = (w[1].1 - w[0].1).abs();
                if dx > 1 || dy > 1 || (dx == 0 && dy == 0) {
                    return Err(GraphError::Invalid("polyline pixels not 8-adjacent".into()));
                }
            }
            let len = astar::polyline_length(&e.polyline);
            if (len - e.length).abs() > 1e-9 {
                return Err(GraphError::Invalid(format!(
                    "edge ({},{}) length {} differs from polyline length {}",
                    e.u, e.v, e.length, len
                )));
            }
        }
        Ok(())
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<(), GraphError> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_json(&mut w)?;
        Ok(())
    }

    /// Serializes in the wire schema: nodes sorted by id, edges by (u,v),
    /// floats with 17 significant digits.
    pub fn write_json<W: Write>(&self, w: &mut W) -> Result<(), GraphError> {
        let mut nodes: Vec<&Node> = self.nodes.iter().collect();
        nodes.sort_by_key(|n| n.id);
        let mut edges: Vec<&Edge> = self.edges.iter().collect();
        edges.sort_by_key(|e| (e.u.min(e.v), e.u.max(e.v)));

        write!(w, "{{\"nodes\":[")?;
        for (i, n) in nodes.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(
                w,
                "{{\"id\":{},\"x\":{},\"y\":{},\"kind\":\"{}\"}}",
                n.id,
                n.coord.0,
                n.coord.1,
                n.kind.as_str()
            )?;
        }
        write!(w, "],\"edges\":[")?;
        for (i, e) in edges.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{{\"u\":{},\"v\":{},\"polyline\":[", e.u, e.v)?;
            for (j, p) in e.polyline.iter().enumerate() {
                if j > 0 {
                    write!(w, ",")?;
                }
                write!(w, "[{},{}]", p.0, p.1)?;
            }
            write!(w, "],\"length\":{},\"cost\":{}", fmt_f64(e.length), fmt_f64(e.cost))?;
            match e.score {
                Some(s) => write!(w, ",\"score\":{}}}", fmt_f64(s))?,
                None => write!(w, ",\"score\":null}}")?,
            }
        }
        write!(w, "]}}")?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self, GraphError> {
        let data = std::fs::read_to_string(path)?;
        Self::from_json(&data)
    }

    pub fn from_json(data: &str) -> Result<Self, GraphError> {
        #[derive(Deserialize)]
        struct WireNode {
            id: u32,
            x: i64,
            y: i64,
            kind: String,
        }
        #[derive(Deserialize)]
        struct WireEdge {
            u: u32,
            v: u32,
            polyline: Vec<(i64, i64)>,
            length: f64,
            cost: f64,
            score: Option<f64>,
        }
        #[derive(Deserialize)]
        struct WireGraph {
            nodes: Vec<WireNode>,
            edges: Vec<WireEdge>,
        }
        let wire: WireGraph = serde_json::from_str(data)?;
        let mut graph = DelinGraph::default();
        for n in wire.nodes {
            let kind = NodeKind::parse(&n.kind)
                .ok_or_else(|| GraphError::Invalid(format!("unknown node kind {:?}", n.kind)))?;
            graph.nodes.push(Node { id: n.id, coord: (n.x, n.y), kind });
        }
        for e in wire.edges {
            graph.edges.push(Edge {
                u: e.u,
                v: e.v,
                polyline: e.polyline,
                length: e.length,
                cost: e.cost,
                score: e.score,
            });
        }
        graph.validate()?;
        Ok(graph)
    }
}

/// Formats an f64 with 17 significant digits in positional notation.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        // JSON has no infinity; the graph domain never produces one
        return "null".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (16 - exp).clamp(0, 40) as usize;
    format!("{:.*}", decimals, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractParams {
    /// Binarization threshold on the tubularity map.
    pub threshold: f64,
    /// Regular grid sampling interval d.
    pub d: i64,
    /// Exclusion-zone radius around existing nodes.
    pub epsilon: f64,
    /// Connection radius factor; pairs within k*d are connected.
    pub k: f64,
    /// Minimum skeleton branch length kept by spur pruning.
    pub min_spur: usize,
    pub search: SearchParams,
}

impl ExtractParams {
    /// Profile constants: d = 250, k = 1.1 for aerial road imagery.
    pub fn roads() -> Self {
        Self::with_d_k(250, 1.1)
    }

    /// Profile constants: d = 30, k = 1.5 for axon imagery.
    pub fn axons() -> Self {
        Self::with_d_k(30, 1.5)
    }

    pub fn with_d_k(d: i64, k: f64) -> Self {
        Self {
            threshold: 0.5,
            d,
            epsilon: (d as f64 / 10.0).max(3.0),
            k,
            min_spur: 5,
            search: SearchParams { search_margin: (d / 2).max(1), ..Default::default() },
        }
    }

    pub fn r_max(&self) -> f64 {
        self.k * self.d as f64
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(GraphError::BadParams("threshold must be in [0,1]"));
        }
        if self.d < 1 {
            return Err(GraphError::BadParams("d must be >= 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.d as f64) {
            return Err(GraphError::BadParams("epsilon must satisfy 0 < epsilon < d"));
        }
        if self.k < 1.0 {
            return Err(GraphError::BadParams("k must be >= 1"));
        }
        Ok(())
    }
}

fn dist(a: Pixel, b: Pixel) -> f64 {
    let dx = (a.0 - b.0) as f64;
    let dy = (a.1 - b.1) as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Endpoints (8-degree 1) and intersections (8-degree >= 3) of the skeleton.
/// Touching clusters of intersection pixels collapse to the member closest to
/// the cluster centroid. Node ids are assigned in raster-scan order.
pub fn find_significant_points(skeleton: &Skeleton) -> Vec<Node> {
    let w = skeleton.width();
    let h = skeleton.height();
    let mut nodes = Vec::new();
    let mut junction: Vec<Pixel> = Vec::new();
    for (x, y) in skeleton.foreground_pixels() {
        match skeleton.degree(x, y) {
            1 => nodes.push((x as i64, y as i64, NodeKind::Endpoint)),
            deg if deg >= 3 => junction.push((x as i64, y as i64)),
            _ => {}
        }
    }
    // collapse 8-connected clusters of junction pixels
    let junction_set: HashSet<Pixel> = junction.iter().copied().collect();
    let mut seen: HashSet<Pixel> = HashSet::new();
    for &p in &junction {
        if seen.contains(&p) {
            continue;
        }
        let mut cluster = vec![p];
        seen.insert(p);
        let mut stack = vec![p];
        while let Some((cx, cy)) = stack.pop() {
            for (nx, ny) in neighbors8(cx as usize, cy as usize, w, h) {
                let q = (nx as i64, ny as i64);
                if junction_set.contains(&q) && seen.insert(q) {
                    cluster.push(q);
                    stack.push(q);
                }
            }
        }
        let cx = cluster.iter().map(|p| p.0 as f64).sum::<f64>() / cluster.len() as f64;
        let cy = cluster.iter().map(|p| p.1 as f64).sum::<f64>() / cluster.len() as f64;
        let rep = *cluster
            .iter()
            .min_by(|a, b| {
                let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                da.partial_cmp(&db).unwrap().then_with(|| (a.1, a.0).cmp(&(b.1, b.0)))
            })
            .unwrap();
        nodes.push((rep.0, rep.1, NodeKind::Intersection));
    }
    nodes.sort_by_key(|&(x, y, _)| (y, x));
    nodes
        .into_iter()
        .enumerate()
        .map(|(i, (x, y, kind))| Node { id: i as u32, coord: (x, y), kind })
        .collect()
}

/// Samples additional nodes where the skeleton crosses the regular grid lines
/// x = 0 mod d and y = 0 mod d. Runs are per grid line: on each line, maximal
/// stretches of consecutive crossing pixels collapse to their middle pixel, so
/// a branch running along one line still yields samples where it crosses the
/// perpendicular lines. Candidates within `epsilon` of an already-accepted
/// node (significant points first, then earlier samples in raster-scan order)
/// are skipped. Ids continue after `existing`.
pub fn sample_regular_nodes(
    skeleton: &Skeleton,
    existing: &[Node],
    d: i64,
    epsilon: f64,
) -> Vec<Node> {
    assert!(d > 0 && epsilon > 0.0 && epsilon < d as f64);
    let w = skeleton.width() as i64;
    let h = skeleton.height() as i64;
    let mut candidates: HashSet<Pixel> = HashSet::new();
    // middle pixel of every maximal run of consecutive positions on one line
    let mut collapse = |line: &[Pixel]| {
        let mut run: Vec<Pixel> = Vec::new();
        for i in 0..=line.len() {
            let continues = i > 0
                && i < line.len()
                && (line[i].0 - line[i - 1].0).abs() <= 1
                && (line[i].1 - line[i - 1].1).abs() <= 1;
            if !continues && !run.is_empty() {
                candidates.insert(run[run.len() / 2]);
                run.clear();
            }
            if i < line.len() {
                run.push(line[i]);
            }
        }
    };
    for x in (0..w).step_by(d as usize) {
        let line: Vec<Pixel> = (0..h)
            .map(|y| (x, y))
            .filter(|&(px, py)| skeleton.get(px as usize, py as usize))
            .collect();
        collapse(&line);
    }
    for y in (0..h).step_by(d as usize) {
        let line: Vec<Pixel> = (0..w)
            .map(|x| (x, y))
            .filter(|&(px, py)| skeleton.get(px as usize, py as usize))
            .collect();
        collapse(&line);
    }
    let mut candidates: Vec<Pixel> = candidates.into_iter().collect();
    candidates.sort_by_key(|&(px, py)| (py, px));

    let mut accepted: Vec<Pixel> = existing.iter().map(|n| n.coord).collect();
    let next_id = existing.iter().map(|n| n.id + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for c in candidates {
        if accepted.iter().any(|&a| dist(a, c) < epsilon) {
            continue;
        }
        accepted.push(c);
        out.push(Node {
            id: next_id + out.len() as u32,
            coord: c,
            kind: NodeKind::GridSample,
        });
    }
    out
}

/// All unordered node pairs with Euclidean distance <= r_max, each once,
/// sorted by (min id, max id). The comparison is boundary inclusive.
pub fn candidate_pairs(nodes: &[Node], r_max: f64) -> Vec<(u32, u32)> {
    assert!(r_max > 0.0);
    let mut pairs = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if dist(a.coord, b.coord) <= r_max {
                pairs.push((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Full candidate-graph construction: threshold, skeletonize, find nodes,
/// sample the grid, then connect every candidate pair with A*. Pairs the
/// search cannot connect yield no edge. Deterministic for fixed inputs.
pub fn build_overcomplete_graph(grid: &ScalarGrid, params: &ExtractParams) -> Result<DelinGraph, GraphError> {
    params.validate()?;
    let mask = grid.threshold(params.threshold);
    let skeleton = mask.skeletonize(params.min_spur);
    build_graph_from_skeleton(grid, &skeleton, params)
}

/// As [`build_overcomplete_graph`] but starting from a precomputed skeleton.
pub fn build_graph_from_skeleton(
    grid: &ScalarGrid,
    skeleton: &Skeleton,
    params: &ExtractParams,
) -> Result<DelinGraph, GraphError> {
    params.validate()?;
    let mut nodes = find_significant_points(skeleton);
    let samples = sample_regular_nodes(skeleton, &nodes, params.d, params.epsilon);
    nodes.extend(samples);
    let pairs = candidate_pairs(&nodes, params.r_max());
    let by_id: HashMap<u32, Pixel> = nodes.iter().map(|n| (n.id, n.coord)).collect();

    // one search per pair; merged in pair-sorted order so output is
    // deterministic regardless of scheduling
    let results: Vec<Option<Edge>> = pairs
        .par_iter()
        .map(|&(u, v)| {
            let start = by_id[&u];
            let goal = by_id[&v];
            astar::astar(grid, start, goal, &params.search)
                .ok()
                .and_then(|o| o.found())
                .map(|r| Edge {
                    u,
                    v,
                    length: r.length(),
                    cost: r.cost,
                    polyline: r.polyline,
                    score: None,
                })
        })
        .collect();

    let edges: Vec<Edge> = results.into_iter().flatten().collect();
    let graph = DelinGraph { nodes, edges };
    graph.validate()?;
    Ok(graph)
}
