//! Topology-aware evaluation of a predicted graph against ground truth:
//! Normalized Path Difference and topological precision/recall.
//!
//! Both metrics work from topologically significant points, nodes of graph
//! degree 1 (endpoints) or >= 3 (intersections). NPD compares shortest-path
//! lengths for every connected pair of ground-truth significant points;
//! precision/recall compare the actual pixel traces for neighboring pairs,
//! swept over a distance threshold m.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::io::Write;

use thiserror::Error;

use crate::astar::Pixel;
use crate::graph::{fmt_f64, DelinGraph, Node};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("ground truth has fewer than 2 significant points")]
    DegenerateGroundTruth,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which predicted nodes ground-truth significant points may match against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchTarget {
    /// All predicted nodes, including degree-2 grid samples.
    All,
    /// Only predicted significant points.
    Significant,
}

#[derive(Debug, Clone)]
pub struct NodeMatch {
    /// gt node id -> (predicted node id, distance), absent when unmatched.
    pub matches: HashMap<u32, (u32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpdReport {
    /// One dissimilarity score in [0,1] per connected gt significant pair.
    pub scores: Vec<f64>,
    /// Cumulative distribution sampled at 0.00, 0.01, ..., 1.00.
    pub cdf: Vec<(f64, f64)>,
}

impl NpdReport {
    pub fn median(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        let mut s = self.scores.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoPr {
    pub m: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub npd: NpdReport,
    pub topo: Vec<TopoPr>,
    pub radius: f64,
}

impl MetricReport {
    pub fn write_json<W: Write>(&self, w: &mut W) -> Result<(), MetricError> {
        write!(w, "{{\"npd\":{{\"scores\":[")?;
        for (i, s) in self.npd.scores.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{}", fmt_f64(*s))?;
        }
        write!(w, "],\"cdf\":[")?;
        for (i, (x, f)) in self.npd.cdf.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "[{},{}]", fmt_f64(*x), fmt_f64(*f))?;
        }
        write!(w, "]}},\"topo\":[")?;
        for (i, t) in self.topo.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(
                w,
                "{{\"m\":{},\"precision\":{},\"recall\":{}}}",
                fmt_f64(t.m),
                fmt_f64(t.precision),
                fmt_f64(t.recall)
            )?;
        }
        write!(w, "],\"params\":{{\"R\":{}}}}}", fmt_f64(self.radius))?;
        Ok(())
    }
}

fn dist(a: Pixel, b: Pixel) -> f64 {
    let dx = (a.0 - b.0) as f64;
    let dy = (a.1 - b.1) as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Nodes with graph degree 1 or >= 3. Grid samples of degree 2 are excluded.
pub fn significant_points(graph: &DelinGraph) -> Vec<Node> {
    let mut degree: HashMap<u32, usize> = HashMap::new();
    for e in &graph.edges {
        *degree.entry(e.u).or_insert(0) += 1;
        *degree.entry(e.v).or_insert(0) += 1;
    }
    graph
        .nodes
        .iter()
        .filter(|n| {
            let d = degree.get(&n.id).copied().unwrap_or(0);
            d == 1 || d >= 3
        })
        .copied()
        .collect()
}

/// Independent nearest-node match for each ground-truth point among the
/// predicted nodes within radius R. No one-to-one constraint.
pub fn match_points(
    gt_pts: &[Node],
    pred: &DelinGraph,
    radius: f64,
    target: MatchTarget,
) -> NodeMatch {
    assert!(radius > 0.0);
    let candidates: Vec<Node> = match target {
        MatchTarget::All => pred.nodes.clone(),
        MatchTarget::Significant => significant_points(pred),
    };
    let mut matches = HashMap::new();
    for g in gt_pts {
        let best = candidates
            .iter()
            .map(|c| (c.id, dist(g.coord, c.coord)))
            .filter(|&(_, d)| d <= radius)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        if let Some((id, d)) = best {
            matches.insert(g.id, (id, d));
        }
    }
    NodeMatch { matches }
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: u32,
}

impl Eq for HeapItem {}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Adjacency<'g> {
    // node -> (neighbor, edge index)
    adj: HashMap<u32, Vec<(u32, usize)>>,
    graph: &'g DelinGraph,
}

impl<'g> Adjacency<'g> {
    fn new(graph: &'g DelinGraph) -> Self {
        let mut adj: HashMap<u32, Vec<(u32, usize)>> = HashMap::new();
        for n in &graph.nodes {
            adj.entry(n.id).or_default();
        }
        for (i, e) in graph.edges.iter().enumerate() {
            adj.entry(e.u).or_default().push((e.v, i));
            adj.entry(e.v).or_default().push((e.u, i));
        }
        for list in adj.values_mut() {
            list.sort_unstable();
        }
        Self { adj, graph }
    }

    /// Dijkstra over edges weighted by polyline length. Returns the
    /// concatenated pixel polyline and its length, or None when disconnected.
    fn shortest_path(&self, a: u32, b: u32) -> Result<Option<(Vec<Pixel>, f64)>, MetricError> {
        if !self.adj.contains_key(&a) {
            return Err(MetricError::UnknownNode(a));
        }
        if !self.adj.contains_key(&b) {
            return Err(MetricError::UnknownNode(b));
        }
        if a == b {
            let coord = self.graph.node(a).unwrap().coord;
            return Ok(Some((vec![coord], 0.0)));
        }
        let mut dist_map: HashMap<u32, f64> = HashMap::new();
        let mut prev: HashMap<u32, (u32, usize)> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist_map.insert(a, 0.0);
        heap.push(HeapItem { dist: 0.0, node: a });
        let mut settled: HashSet<u32> = HashSet::new();
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if settled.contains(&node) {
                continue;
            }
            settled.insert(node);
            if node == b {
                break;
            }
            for &(next, ei) in &self.adj[&node] {
                if settled.contains(&next) {
                    continue;
                }
                let nd = d + self.graph.edges[ei].length;
                if nd < *dist_map.get(&next).unwrap_or(&f64::INFINITY) {
                    dist_map.insert(next, nd);
                    prev.insert(next, (node, ei));
                    heap.push(HeapItem { dist: nd, node: next });
                }
            }
        }
        let Some(&total) = dist_map.get(&b) else {
            return Ok(None);
        };
        if !settled.contains(&b) {
            return Ok(None);
        }
        // walk back to a, stitching edge polylines in forward orientation
        let mut polyline: Vec<Pixel> = Vec::new();
        let mut cur = b;
        let mut segments: Vec<Vec<Pixel>> = Vec::new();
        while cur != a {
            let (par, ei) = prev[&cur];
            let e = &self.graph.edges[ei];
            let mut seg = e.polyline.clone();
            // orient from parent to cur
            if e.u == cur {
                seg.reverse();
            }
            segments.push(seg);
            cur = par;
        }
        segments.reverse();
        for seg in segments {
            if polyline.is_empty() {
                polyline = seg;
            } else {
                debug_assert_eq!(polyline.last(), seg.first());
                polyline.extend_from_slice(&seg[1..]);
            }
        }
        Ok(Some((polyline, total)))
    }
}

/// Shortest path over graph edges weighted by polyline length.
pub fn graph_shortest_path(
    graph: &DelinGraph,
    a: u32,
    b: u32,
) -> Result<Option<(Vec<Pixel>, f64)>, MetricError> {
    Adjacency::new(graph).shortest_path(a, b)
}

fn connected_pairs(graph: &DelinGraph, pts: &[Node]) -> Vec<(u32, u32)> {
    // union-find over graph edges
    let ids: Vec<u32> = graph.nodes.iter().map(|n| n.id).collect();
    let index: HashMap<u32, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = i;
        while parent[c] != r {
            let n = parent[c];
            parent[c] = r;
            c = n;
        }
        r
    }
    for e in &graph.edges {
        let (iu, iv) = (index[&e.u], index[&e.v]);
        let (ru, rv) = (find(&mut parent, iu), find(&mut parent, iv));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    let mut pairs = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            if find(&mut parent, index[&p.id]) == find(&mut parent, index[&q.id]) {
                pairs.push((p.id, q.id));
            }
        }
    }
    pairs
}

/// Normalized Path Difference: for every pair of gt significant points in the
/// same gt component, min{|l - l*| / l*, 1} between the predicted and
/// ground-truth shortest-path lengths; 1 when either endpoint is unmatched or
/// the matched nodes are disconnected in the prediction.
pub fn npd(
    gt: &DelinGraph,
    pred: &DelinGraph,
    radius: f64,
    target: MatchTarget,
) -> Result<NpdReport, MetricError> {
    let pts = significant_points(gt);
    if pts.len() < 2 {
        return Err(MetricError::DegenerateGroundTruth);
    }
    let matching = match_points(&pts, pred, radius, target);
    let gt_adj = Adjacency::new(gt);
    let pred_adj = Adjacency::new(pred);
    let pairs = connected_pairs(gt, &pts);
    let mut scores = Vec::with_capacity(pairs.len());
    for (a_star, b_star) in pairs {
        let Some((_, l_star)) = gt_adj.shortest_path(a_star, b_star)? else {
            continue; // connected_pairs guarantees a path; defensive skip
        };
        let score = match (matching.matches.get(&a_star), matching.matches.get(&b_star)) {
            (Some(&(a, _)), Some(&(b, _))) => match pred_adj.shortest_path(a, b)? {
                Some((_, l)) => {
                    if l_star > 0.0 {
                        ((l - l_star).abs() / l_star).min(1.0)
                    } else {
                        0.0
                    }
                }
                None => 1.0,
            },
            _ => 1.0,
        };
        scores.push(score);
    }
    let cdf = build_cdf(&scores);
    Ok(NpdReport { scores, cdf })
}

fn build_cdf(scores: &[f64]) -> Vec<(f64, f64)> {
    let n = scores.len().max(1) as f64;
    (0..=100)
        .map(|i| {
            let x = i as f64 / 100.0;
            let frac = scores.iter().filter(|&&s| s <= x + 1e-12).count() as f64 / n;
            (x, if scores.is_empty() { 1.0 } else { frac })
        })
        .collect()
}

/// Pairs of gt significant points joined by a chain of edges passing only
/// through non-significant (degree-2) nodes, with the concatenated chain
/// polyline. Edge-adjacent significant pairs are the base case.
fn neighbor_pairs(gt: &DelinGraph, pts: &[Node]) -> Vec<(u32, u32, Vec<Pixel>)> {
    let sig: HashSet<u32> = pts.iter().map(|n| n.id).collect();
    let adj = Adjacency::new(gt);
    let mut seen: HashSet<(u32, u32, u32)> = HashSet::new(); // (a, b, first edge)
    let mut out = Vec::new();
    for p in pts {
        for &(first_next, first_edge) in &adj.adj[&p.id] {
            // walk from p through degree-2 non-significant nodes
            let mut chain: Vec<Pixel> = {
                let e = &gt.edges[first_edge];
                let mut seg = e.polyline.clone();
                if e.u == first_next {
                    seg.reverse();
                }
                seg
            };
            let mut prev_edge = first_edge;
            let mut cur = first_next;
            loop {
                if sig.contains(&cur) {
                    // each chain is recorded once, from its lower-id endpoint;
                    // parallel chains differ in their first edge
                    if p.id < cur && seen.insert((p.id, cur, first_edge as u32)) {
                        out.push((p.id, cur, chain.clone()));
                    }
                    break;
                }
                let next: Vec<(u32, usize)> = adj.adj[&cur]
                    .iter()
                    .copied()
                    .filter(|&(_, ei)| ei != prev_edge)
                    .collect();
                if next.len() != 1 {
                    break; // isolated oddity; not a clean chain
                }
                let (nn, ne) = next[0];
                let e = &gt.edges[ne];
                let mut seg = e.polyline.clone();
                if e.u == nn {
                    seg.reverse();
                }
                debug_assert_eq!(chain.last(), seg.first());
                chain.extend_from_slice(&seg[1..]);
                prev_edge = ne;
                cur = nn;
            }
        }
    }
    out
}

fn pixels_within(path: &[Pixel], other: &HashSet<Pixel>, m: f64) -> usize {
    if m < 0.0 {
        return 0;
    }
    let mi = m.floor() as i64;
    let m2 = m * m;
    path.iter()
        .filter(|&&(x, y)| {
            for dy in -mi..=mi {
                for dx in -mi..=mi {
                    if (dx * dx + dy * dy) as f64 <= m2 && other.contains(&(x + dx, y + dy)) {
                        return true;
                    }
                }
            }
            false
        })
        .count()
}

/// Topological precision/recall at distance threshold m, per the pixel-match
/// aggregation: precision = (1/sum n_m) * sum (n_m/n_t) n_m over predicted
/// paths, recall = sum n_m* / sum n_t* over ground-truth paths.
pub fn topo_pr(
    gt: &DelinGraph,
    pred: &DelinGraph,
    radius: f64,
    m: f64,
    target: MatchTarget,
) -> Result<(f64, f64), MetricError> {
    assert!(m >= 0.0);
    let pts = significant_points(gt);
    let matching = match_points(&pts, pred, radius, target);
    let pred_adj = Adjacency::new(pred);
    let pairs = neighbor_pairs(gt, &pts);

    let mut sum_nm = 0.0;
    let mut sum_weighted = 0.0; // sum over pairs of n_m^2 / n_t
    let mut sum_nm_star = 0.0;
    let mut sum_nt_star = 0.0;

    for (a_star, b_star, gt_path) in pairs {
        let nt_star = gt_path.len() as f64;
        sum_nt_star += nt_star;
        let pred_path = match (matching.matches.get(&a_star), matching.matches.get(&b_star)) {
            (Some(&(a, _)), Some(&(b, _))) => pred_adj.shortest_path(a, b)?,
            _ => None,
        };
        let Some((pp, _len)) = pred_path else {
            continue; // n_m and n_m* are zero for this pair
        };
        let gt_set: HashSet<Pixel> = gt_path.iter().copied().collect();
        let pred_set: HashSet<Pixel> = pp.iter().copied().collect();
        let n_m = pixels_within(&pp, &gt_set, m) as f64;
        let n_t = pp.len() as f64;
        let n_m_star = pixels_within(&gt_path, &pred_set, m) as f64;
        sum_nm += n_m;
        if n_t > 0.0 {
            sum_weighted += n_m * n_m / n_t;
        }
        sum_nm_star += n_m_star;
    }

    let precision = if sum_nm > 0.0 { sum_weighted / sum_nm } else { 0.0 };
    let recall = if sum_nt_star > 0.0 { sum_nm_star / sum_nt_star } else { 0.0 };
    Ok((precision, recall))
}

/// Runs both metrics and assembles the report.
pub fn evaluate(
    gt: &DelinGraph,
    pred: &DelinGraph,
    radius: f64,
    ms: &[f64],
    target: MatchTarget,
) -> Result<MetricReport, MetricError> {
    let npd_report = npd(gt, pred, radius, target)?;
    let mut topo = Vec::with_capacity(ms.len());
    for &m in ms {
        let (precision, recall) = topo_pr(gt, pred, radius, m, target)?;
        topo.push(TopoPr { m, precision, recall });
    }
    Ok(MetricReport { npd: npd_report, topo, radius })
}
