//! Seeded synthetic curvilinear networks: a ground-truth graph, its rendered
//! mask, and a blurred, noisy tubularity map. Everything is a pure function
//! of the parameters, so fixtures reproduce bit-exactly across runs.

use crate::astar::{polyline_length, Pixel};
use crate::graph::{DelinGraph, Edge, Node, NodeKind};
use crate::raster::{BinaryMask, ScalarGrid};

/// SplitMix64: state advances by 0x9E3779B97F4A7C15, output is mixed with
/// the 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB constants. Portable across
/// languages so fixtures can be regenerated elsewhere.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform integer in [0, bound).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    /// Square image side length.
    pub extent: usize,
    pub n_seeds: usize,
    /// Probability of adding an extra edge between each nearby non-tree pair.
    pub loop_prob: f64,
    /// Structure width in pixels.
    pub width: usize,
    /// Gaussian blur sigma for the tubularity rendering.
    pub sigma: f64,
    /// Uniform noise amplitude added to the tubularity rendering.
    pub noise_amp: f64,
}

impl SynthParams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            extent: 512,
            n_seeds: 12,
            loop_prob: 0.0,
            width: 5,
            sigma: 1.0,
            noise_amp: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.extent < 64 {
            return Err("extent must be >= 64");
        }
        if self.width < 1 {
            return Err("width must be >= 1");
        }
        if self.n_seeds < 2 {
            return Err("n_seeds must be >= 2");
        }
        if !(0.0..=1.0).contains(&self.loop_prob) {
            return Err("loop_prob must be in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.noise_amp) {
            return Err("noise_amp must be in [0,1]");
        }
        Ok(())
    }
}

fn dist(a: Pixel, b: Pixel) -> f64 {
    let dx = (a.0 - b.0) as f64;
    let dy = (a.1 - b.1) as f64;
    (dx * dx + dy * dy).sqrt()
}

/// 8-connected Bresenham line from a to b, inclusive.
fn bresenham(a: Pixel, b: Pixel) -> Vec<Pixel> {
    let mut out = Vec::new();
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = (b.0 - a.0).signum();
    let sy = (b.1 - a.1).signum();
    let mut err = dx + dy;
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// One round of Chaikin corner cutting, endpoints fixed.
fn chaikin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        let (p, q) = (w[0], w[1]);
        out.push((0.75 * p.0 + 0.25 * q.0, 0.75 * p.1 + 0.25 * q.1));
        out.push((0.25 * p.0 + 0.75 * q.0, 0.25 * p.1 + 0.75 * q.1));
    }
    out.push(*points.last().unwrap());
    out
}

/// Smoothed pixel chain between two nodes: the straight segment gets a
/// perpendicular midpoint jitter, two Chaikin rounds, then rasterization.
fn smooth_polyline(a: Pixel, b: Pixel, rng: &mut SplitMix64, extent: usize) -> Vec<Pixel> {
    let len = dist(a, b);
    let mid = ((a.0 + b.0) as f64 / 2.0, (a.1 + b.1) as f64 / 2.0);
    // unit normal of the segment
    let (nx, ny) = if len > 0.0 {
        (-((b.1 - a.1) as f64) / len, ((b.0 - a.0) as f64) / len)
    } else {
        (0.0, 0.0)
    };
    let amp = (rng.next_f64() - 0.5) * (len / 4.0).min(24.0);
    let hi = extent as f64 - 1.0;
    let mid = ((mid.0 + nx * amp).clamp(0.0, hi), (mid.1 + ny * amp).clamp(0.0, hi));
    let mut ctrl = vec![(a.0 as f64, a.1 as f64), mid, (b.0 as f64, b.1 as f64)];
    for _ in 0..2 {
        ctrl = chaikin(&ctrl);
    }
    let mut polyline: Vec<Pixel> = Vec::new();
    let rounded: Vec<Pixel> = ctrl
        .iter()
        .map(|&(x, y)| (x.round() as i64, y.round() as i64))
        .collect();
    for w in rounded.windows(2) {
        let seg = bresenham(w[0], w[1]);
        if polyline.is_empty() {
            polyline.extend(seg);
        } else {
            polyline.extend(seg.into_iter().skip(1));
        }
    }
    // rounding can repeat pixels at control-point joins
    polyline.dedup();
    polyline
}

/// Samples seed points, connects them with a Euclidean minimum spanning tree
/// of smoothed polylines, and adds loop edges between nearby non-tree pairs
/// with probability `loop_prob`.
pub fn gen_network(params: &SynthParams) -> DelinGraph {
    params.validate().expect("invalid synth params");
    let mut rng = SplitMix64::new(params.seed);
    let extent = params.extent as i64;
    let margin = ((extent / 16).max(8)).min(extent / 4);
    let span = (extent - 2 * margin) as u64;

    let mut coords: Vec<Pixel> = Vec::with_capacity(params.n_seeds);
    while coords.len() < params.n_seeds {
        let p = (
            margin + rng.next_below(span) as i64,
            margin + rng.next_below(span) as i64,
        );
        // keep seeds apart so structures stay distinguishable
        if coords.iter().all(|&q| dist(p, q) >= 20.0) {
            coords.push(p);
        }
    }

    // Prim's MST
    let n = coords.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (dist(coords[0], coords[j]), 0);
    }
    let mut tree_edges: Vec<(usize, usize)> = Vec::new();
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_d = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best[j].0 < pick_d {
                pick_d = best[j].0;
                pick = j;
            }
        }
        in_tree[pick] = true;
        tree_edges.push((best[pick].1.min(pick), best[pick].1.max(pick)));
        for j in 0..n {
            if !in_tree[j] {
                let d = dist(coords[pick], coords[j]);
                if d < best[j].0 {
                    best[j] = (d, pick);
                }
            }
        }
    }
    tree_edges.sort_unstable();

    // optional loop edges between nearby non-tree pairs
    let loop_radius = (extent as f64) / 3.0;
    let tree_set: std::collections::HashSet<(usize, usize)> = tree_edges.iter().copied().collect();
    let mut extra: Vec<(usize, usize)> = Vec::new();
    if params.loop_prob > 0.0 {
        for i in 0..n {
            for j in i + 1..n {
                if !tree_set.contains(&(i, j))
                    && dist(coords[i], coords[j]) <= loop_radius
                    && rng.next_f64() < params.loop_prob
                {
                    extra.push((i, j));
                }
            }
        }
    }

    let mut edges = Vec::new();
    for &(i, j) in tree_edges.iter().chain(extra.iter()) {
        let polyline = smooth_polyline(coords[i], coords[j], &mut rng, params.extent);
        let length = polyline_length(&polyline);
        edges.push(Edge { u: i as u32, v: j as u32, polyline, length, cost: 0.0, score: None });
    }

    let mut degree = vec![0usize; n];
    for e in &edges {
        degree[e.u as usize] += 1;
        degree[e.v as usize] += 1;
    }
    let nodes = coords
        .into_iter()
        .enumerate()
        .map(|(i, coord)| Node {
            id: i as u32,
            coord,
            kind: match degree[i] {
                1 => NodeKind::Endpoint,
                d if d >= 3 => NodeKind::Intersection,
                _ => NodeKind::GridSample,
            },
        })
        .collect();
    DelinGraph { nodes, edges }
}

/// Rasterizes every edge polyline and dilates to width `w`.
pub fn render_mask(graph: &DelinGraph, w: usize, extent: usize) -> BinaryMask {
    let mut mask = BinaryMask::empty(extent, extent);
    for e in &graph.edges {
        for &(x, y) in &e.polyline {
            if x >= 0 && y >= 0 && (x as usize) < extent && (y as usize) < extent {
                mask.set(x as usize, y as usize, true);
            }
        }
    }
    if w > 1 {
        mask.dilate((w - 1) as f64 / 2.0)
    } else {
        mask
    }
}

/// mask -> {1.0, 0.0}, separable Gaussian blur (zero boundary), uniform noise
/// in [-noise_amp, +noise_amp], clamp to [0,1]. Deterministic per seed.
pub fn render_tubularity(mask: &BinaryMask, sigma: f64, noise_amp: f64, seed: u64) -> ScalarGrid {
    let w = mask.width();
    let h = mask.height();
    let mut values: Vec<f64> = (0..w * h)
        .map(|i| if mask.get(i % w, i / w) { 1.0 } else { 0.0 })
        .collect();

    if sigma > 0.0 {
        let radius = (3.0 * sigma).ceil() as i64;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();

        let mut tmp = vec![0.0; w * h];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = x + ki as i64 - radius;
                    if sx >= 0 && (sx as usize) < w {
                        acc += k * values[y as usize * w + sx as usize];
                    }
                }
                tmp[y as usize * w + x as usize] = acc;
            }
        }
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sy = y + ki as i64 - radius;
                    if sy >= 0 && (sy as usize) < h {
                        acc += k * tmp[sy as usize * w + x as usize];
                    }
                }
                values[y as usize * w + x as usize] = acc;
            }
        }
    }

    if noise_amp > 0.0 {
        let mut rng = SplitMix64::new(seed);
        for v in values.iter_mut() {
            *v += (rng.next_f64() * 2.0 - 1.0) * noise_amp;
        }
    }
    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    ScalarGrid::new(w, h, values).expect("clamped values")
}
