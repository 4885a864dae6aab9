//! Edge validity scoring and graph pruning.
//!
//! Built-in scorers summarize tubularity along the path; the external scorer
//! delegates to a child process speaking line-delimited JSON, the hook for a
//! learned path classifier.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use thiserror::Error;

use crate::astar::Pixel;
use crate::graph::{fmt_f64, DelinGraph, GraphError};
use crate::raster::ScalarGrid;
use crate::samples::{crop_patch, split_path, SampleError};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("empty polyline")]
    EmptyPolyline,
    #[error("polyline pixel ({0}, {1}) out of bounds")]
    OutOfBounds(i64, i64),
    #[error("quantile {0} outside [0,1]")]
    BadQuantile(f64),
    #[error("edge ({0},{1}) has no score; run scoring before pruning")]
    Unscored(u32, u32),
    #[error("failed to spawn external scorer {command:?}: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("external scorer protocol violation: {0}")]
    Protocol(String),
    #[error("external scorer timed out after {0:?}")]
    Timeout(Duration),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which scorer to run over each candidate edge.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    MeanTubularity,
    QuantileTubularity(f64),
    External { command: String, args: Vec<String> },
}

/// Patch side length used when shipping polylines to an external scorer.
pub const DEFAULT_PATCH_SIZE: usize = 256;

fn check_polyline(grid: &ScalarGrid, polyline: &[Pixel]) -> Result<(), ScoreError> {
    if polyline.is_empty() {
        return Err(ScoreError::EmptyPolyline);
    }
    for &(x, y) in polyline {
        if !grid.in_bounds(x, y) {
            return Err(ScoreError::OutOfBounds(x, y));
        }
    }
    Ok(())
}

/// Arithmetic mean of tubularity along the polyline.
pub fn score_mean(grid: &ScalarGrid, polyline: &[Pixel]) -> Result<f64, ScoreError> {
    check_polyline(grid, polyline)?;
    let sum: f64 = polyline.iter().map(|&(x, y)| grid.get(x as usize, y as usize)).sum();
    Ok(sum / polyline.len() as f64)
}

/// Nearest-rank q-th quantile of tubularity along the polyline. A single
/// low-tubularity gap drags low quantiles down, which mean scoring hides.
pub fn score_quantile(grid: &ScalarGrid, polyline: &[Pixel], q: f64) -> Result<f64, ScoreError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(ScoreError::BadQuantile(q));
    }
    check_polyline(grid, polyline)?;
    let mut vals: Vec<f64> = polyline.iter().map(|&(x, y)| grid.get(x as usize, y as usize)).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    // nearest-rank: smallest value whose rank >= ceil(q*n); q=0 -> minimum
    let rank = ((q * n as f64).ceil() as usize).max(1).min(n);
    Ok(vals[rank - 1])
}

/// A running external scorer child process. Requests are answered strictly in
/// order on its stdout.
pub struct ExternalScorer {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
    command: String,
}

impl ExternalScorer {
    pub fn spawn(command: &str, args: &[String]) -> Result<Self, ScoreError> {
        Self::spawn_with_timeout(command, args, Duration::from_secs(30))
    }

    pub fn spawn_with_timeout(
        command: &str,
        args: &[String],
        timeout: Duration,
    ) -> Result<Self, ScoreError> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|source| ScoreError::Spawn { command: command.to_string(), source })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout,
            command: command.to_string(),
        })
    }

    fn request(&mut self, patch: &ScalarGrid, local_polyline: &[Pixel]) -> Result<f64, ScoreError> {
        let mut line = String::with_capacity(patch.values().len() * 8);
        line.push_str(&format!("{{\"width\":{},\"height\":{},\"values\":[", patch.width(), patch.height()));
        for (i, &v) in patch.values().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(v));
        }
        line.push_str("],\"polyline\":[");
        for (i, &(x, y)) in local_polyline.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("[{x},{y}]"));
        }
        line.push_str("]}\n");
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| ScoreError::Protocol(format!("write to {} failed: {e}", self.command)))?;

        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => return Err(ScoreError::Protocol(format!("read failed: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(ScoreError::Timeout(self.timeout)),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(ScoreError::Protocol("child exited before responding".into()))
            }
        };
        let value: serde_json::Value = serde_json::from_str(reply.trim())
            .map_err(|e| ScoreError::Protocol(format!("non-JSON response line: {e}")))?;
        let score = value
            .get("score")
            .and_then(|s| s.as_f64())
            .ok_or_else(|| ScoreError::Protocol("response missing numeric \"score\" field".into()))?;
        Ok(score.clamp(0.0, 1.0))
    }

    /// Scores a polyline. Polylines larger than one patch are split and the
    /// minimum sub-score returned: a path is only as valid as its worst piece.
    pub fn score(
        &mut self,
        grid: &ScalarGrid,
        polyline: &[Pixel],
        patch_size: usize,
    ) -> Result<f64, ScoreError> {
        check_polyline(grid, polyline)?;
        let pieces = split_path(polyline, patch_size as i64 - 1);
        let mut worst = f64::INFINITY;
        for piece in &pieces {
            let (patch, local, _origin) = crop_patch(grid, piece, patch_size)?;
            worst = worst.min(self.request(&patch, &local)?);
        }
        Ok(worst)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Fills in the `score` field of every edge using the given scorer.
pub fn score_graph(
    grid: &ScalarGrid,
    graph: &DelinGraph,
    spec: &ScorerSpec,
    patch_size: usize,
) -> Result<DelinGraph, ScoreError> {
    let mut out = graph.clone();
    match spec {
        ScorerSpec::MeanTubularity => {
            for e in &mut out.edges {
                e.score = Some(score_mean(grid, &e.polyline)?);
            }
        }
        ScorerSpec::QuantileTubularity(q) => {
            for e in &mut out.edges {
                e.score = Some(score_quantile(grid, &e.polyline, *q)?);
            }
        }
        ScorerSpec::External { command, args } => {
            let mut scorer = ExternalScorer::spawn(command, args)?;
            // one serial request/response channel; edges in (u,v) order
            let mut order: Vec<usize> = (0..out.edges.len()).collect();
            order.sort_by_key(|&i| (out.edges[i].u.min(out.edges[i].v), out.edges[i].u.max(out.edges[i].v)));
            for i in order {
                let s = scorer.score(grid, &out.edges[i].polyline, patch_size)?;
                out.edges[i].score = Some(s);
            }
        }
    }
    Ok(out)
}

/// Keeps edges with score >= tau and drops nodes left with degree 0. Node ids
/// are preserved; no renumbering.
pub fn prune(graph: &DelinGraph, tau: f64) -> Result<DelinGraph, ScoreError> {
    for e in &graph.edges {
        if e.score.is_none() {
            return Err(ScoreError::Unscored(e.u, e.v));
        }
    }
    let edges: Vec<_> = graph
        .edges
        .iter()
        .filter(|e| e.score.unwrap() >= tau)
        .cloned()
        .collect();
    let keep: std::collections::HashSet<u32> =
        edges.iter().flat_map(|e| [e.u, e.v]).collect();
    let nodes = graph.nodes.iter().filter(|n| keep.contains(&n.id)).copied().collect();
    Ok(DelinGraph { nodes, edges })
}
