//! Grid shortest-path search over a tubularity map.
//!
//! The per-pixel cost of adding pixel (x,y) to a path is `base - p(x,y)`
//! (default base 1.1, so every step costs at least 0.1), and the heuristic is
//! `hweight * euclid(pixel, goal)` (default 0.5). The start pixel is free;
//! cost is charged per pixel entered, regardless of step direction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::raster::ScalarGrid;

pub type Pixel = (i64, i64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Per-pixel cost offset; must exceed 1 so step costs stay positive.
    pub base: f64,
    /// Heuristic weight on the Euclidean distance to the goal.
    pub hweight: f64,
    /// Grid connectivity, 4 or 8.
    pub connectivity: u8,
    /// Padding around the endpoints' bounding box; the search never leaves it.
    pub search_margin: i64,
    /// Abort after this many node expansions.
    pub max_expansions: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            base: 1.1,
            hweight: 0.5,
            connectivity: 8,
            search_margin: 125,
            max_expansions: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Pixel chain from start to goal; consecutive pixels are 8-neighbors.
    pub polyline: Vec<Pixel>,
    /// Accumulated cost: sum of (base - p) over every pixel except the first.
    pub cost: f64,
}

impl PathResult {
    /// Geometric length: unit steps count 1, diagonal steps sqrt(2).
    pub fn length(&self) -> f64 {
        polyline_length(&self.polyline)
    }
}

pub fn polyline_length(polyline: &[Pixel]) -> f64 {
    polyline
        .windows(2)
        .map(|w| {
            let dx = (w[1].0 - w[0].0).abs();
            let dy = (w[1].1 - w[0].1).abs();
            if dx + dy == 2 && dx == 1 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found(PathResult),
    /// The goal is not reachable within the search region.
    Unreachable,
    /// The expansion cap was exhausted before the goal was settled.
    CapExhausted,
}

impl SearchOutcome {
    pub fn found(self) -> Option<PathResult> {
        match self {
            SearchOutcome::Found(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("pixel ({0}, {1}) is outside the grid")]
    OutOfBounds(i64, i64),
    #[error("invalid search params: {0}")]
    BadParams(&'static str),
    #[error("polyline pixels ({0}, {1}) and ({2}, {3}) are not 8-adjacent")]
    NotAdjacent(i64, i64, i64, i64),
    #[error("empty polyline")]
    EmptyPolyline,
}

struct Region {
    x0: i64,
    y0: i64,
    x1: i64, // inclusive
    y1: i64,
}

impl Region {
    fn around(start: Pixel, goal: Pixel, margin: i64, grid: &ScalarGrid) -> Region {
        let x0 = (start.0.min(goal.0) - margin).max(0);
        let y0 = (start.1.min(goal.1) - margin).max(0);
        let x1 = (start.0.max(goal.0) + margin).min(grid.width() as i64 - 1);
        let y1 = (start.1.max(goal.1) + margin).min(grid.height() as i64 - 1);
        Region { x0, y0, x1, y1 }
    }

    #[inline]
    fn contains(&self, p: Pixel) -> bool {
        p.0 >= self.x0 && p.0 <= self.x1 && p.1 >= self.y0 && p.1 <= self.y1
    }

    #[inline]
    fn width(&self) -> i64 {
        self.x1 - self.x0 + 1
    }

    #[inline]
    fn index(&self, p: Pixel) -> usize {
        ((p.1 - self.y0) * self.width() + (p.0 - self.x0)) as usize
    }

    fn len(&self) -> usize {
        (self.width() * (self.y1 - self.y0 + 1)) as usize
    }
}

const OFF8: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];
const OFF4: [(i64, i64); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

#[derive(PartialEq)]
struct QueueEntry {
    f: f64,
    h: f64,
    pixel: Pixel,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: reverse so the smallest f pops first.
        // Ties break toward lower h, then lexicographic (y, x).
        other
            .f
            .partial_cmp(&self.f)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.h.partial_cmp(&self.h).unwrap_or(Ordering::Equal))
            .then_with(|| (other.pixel.1, other.pixel.0).cmp(&(self.pixel.1, self.pixel.0)))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn validate(grid: &ScalarGrid, start: Pixel, goal: Pixel, params: &SearchParams) -> Result<(), SearchError> {
    for p in [start, goal] {
        if !grid.in_bounds(p.0, p.1) {
            return Err(SearchError::OutOfBounds(p.0, p.1));
        }
    }
    if params.base <= 1.0 {
        return Err(SearchError::BadParams("base must be > 1"));
    }
    if params.hweight < 0.0 {
        return Err(SearchError::BadParams("hweight must be >= 0"));
    }
    if params.connectivity != 4 && params.connectivity != 8 {
        return Err(SearchError::BadParams("connectivity must be 4 or 8"));
    }
    Ok(())
}

#[inline]
fn euclid(a: Pixel, b: Pixel) -> f64 {
    let dx = (a.0 - b.0) as f64;
    let dy = (a.1 - b.1) as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Best-first search with priority `f = g + hweight * euclid(pixel, goal)`.
/// Settled nodes are never reopened, so with an inadmissible heuristic the
/// returned path can be slightly worse than optimal.
pub fn astar(
    grid: &ScalarGrid,
    start: Pixel,
    goal: Pixel,
    params: &SearchParams,
) -> Result<SearchOutcome, SearchError> {
    validate(grid, start, goal, params)?;
    if start == goal {
        return Ok(SearchOutcome::Found(PathResult { polyline: vec![start], cost: 0.0 }));
    }
    let region = Region::around(start, goal, params.search_margin, grid);
    let n = region.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let offsets: &[(i64, i64)] = if params.connectivity == 4 { &OFF4 } else { &OFF8 };

    let mut heap = BinaryHeap::new();
    let si = region.index(start);
    g[si] = 0.0;
    let h0 = params.hweight * euclid(start, goal);
    heap.push(QueueEntry { f: h0, h: h0, pixel: start });
    let mut expansions = 0usize;

    while let Some(QueueEntry { pixel, .. }) = heap.pop() {
        let idx = region.index(pixel);
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if pixel == goal {
            return Ok(SearchOutcome::Found(reconstruct(&region, &parent, goal, g[idx])));
        }
        expansions += 1;
        if expansions >= params.max_expansions {
            return Ok(SearchOutcome::CapExhausted);
        }
        for &(dx, dy) in offsets {
            let np = (pixel.0 + dx, pixel.1 + dy);
            if !region.contains(np) {
                continue;
            }
            let ni = region.index(np);
            if closed[ni] {
                continue;
            }
            let step = params.base - grid.get(np.0 as usize, np.1 as usize);
            let tentative = g[idx] + step;
            if tentative < g[ni] {
                g[ni] = tentative;
                parent[ni] = idx as u32;
                let h = params.hweight * euclid(np, goal);
                heap.push(QueueEntry { f: tentative + h, h, pixel: np });
            }
        }
    }
    Ok(SearchOutcome::Unreachable)
}

/// Exact shortest path within the search region: classic Dijkstra with a
/// distance map and stale-entry skipping. Independent of [`astar`] so the two
/// can cross-check each other.
pub fn dijkstra(
    grid: &ScalarGrid,
    start: Pixel,
    goal: Pixel,
    params: &SearchParams,
) -> Result<SearchOutcome, SearchError> {
    validate(grid, start, goal, params)?;
    if start == goal {
        return Ok(SearchOutcome::Found(PathResult { polyline: vec![start], cost: 0.0 }));
    }
    let region = Region::around(start, goal, params.search_margin, grid);
    let n = region.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut settled = vec![false; n];
    let offsets: &[(i64, i64)] = if params.connectivity == 4 { &OFF4 } else { &OFF8 };

    let mut heap = BinaryHeap::new();
    dist[region.index(start)] = 0.0;
    heap.push(QueueEntry { f: 0.0, h: 0.0, pixel: start });
    let mut expansions = 0usize;

    while let Some(QueueEntry { f, pixel, .. }) = heap.pop() {
        let idx = region.index(pixel);
        if settled[idx] || f > dist[idx] {
            continue;
        }
        settled[idx] = true;
        if pixel == goal {
            return Ok(SearchOutcome::Found(reconstruct(&region, &parent, goal, dist[idx])));
        }
        expansions += 1;
        if expansions >= params.max_expansions {
            return Ok(SearchOutcome::CapExhausted);
        }
        for &(dx, dy) in offsets {
            let np = (pixel.0 + dx, pixel.1 + dy);
            if !region.contains(np) {
                continue;
            }
            let ni = region.index(np);
            let step = params.base - grid.get(np.0 as usize, np.1 as usize);
            let alt = dist[idx] + step;
            if alt < dist[ni] {
                dist[ni] = alt;
                parent[ni] = idx as u32;
                heap.push(QueueEntry { f: alt, h: 0.0, pixel: np });
            }
        }
    }
    Ok(SearchOutcome::Unreachable)
}

fn reconstruct(region: &Region, parent: &[u32], goal: Pixel, cost: f64) -> PathResult {
    let mut polyline = Vec::new();
    let mut idx = region.index(goal);
    loop {
        let x = region.x0 + (idx as i64 % region.width());
        let y = region.y0 + (idx as i64 / region.width());
        polyline.push((x, y));
        let p = parent[idx];
        if p == u32::MAX {
            break;
        }
        idx = p as usize;
    }
    polyline.reverse();
    PathResult { polyline, cost }
}

/// Recomputes a path's accumulated cost: sum of `base - p` over every pixel
/// after the first.
pub fn path_cost(grid: &ScalarGrid, polyline: &[Pixel], base: f64) -> Result<f64, SearchError> {
    if polyline.is_empty() {
        return Err(SearchError::EmptyPolyline);
    }
    for &(x, y) in polyline {
        if !grid.in_bounds(x, y) {
            return Err(SearchError::OutOfBounds(x, y));
        }
    }
    for w in polyline.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dx = (a.0 - b.0).abs();
        let dy = (a.1 - b.1).abs();
        if dx > 1 || dy > 1 || (dx == 0 && dy == 0) {
            return Err(SearchError::NotAdjacent(a.0, a.1, b.0, b.1));
        }
    }
    Ok(polyline
        .iter()
        .skip(1)
        .map(|&(x, y)| base - grid.get(x as usize, y as usize))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ScalarGrid;

    fn grid_from(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> ScalarGrid {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        ScalarGrid::new(width, height, values).unwrap()
    }

    fn seeded_grid(width: usize, height: usize, seed: u64) -> ScalarGrid {
        let state = std::cell::Cell::new(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
        grid_from(width, height, move |_, _| {
            let mut s = state.get();
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            state.set(s);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn straight_corridor_cost() {
        let g = ScalarGrid::filled(10, 1, 1.0);
        let params = SearchParams::default();
        let r = astar(&g, (0, 0), (9, 0), &params).unwrap().found().unwrap();
        assert!((r.cost - 0.9).abs() < 1e-12);
        assert_eq!(r.polyline.len(), 10);
        for (i, &(x, y)) in r.polyline.iter().enumerate() {
            assert_eq!((x, y), (i as i64, 0));
        }
    }

    #[test]
    fn start_equals_goal() {
        let g = ScalarGrid::filled(5, 5, 0.5);
        let r = astar(&g, (2, 2), (2, 2), &SearchParams::default()).unwrap().found().unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.polyline, vec![(2, 2)]);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let g = ScalarGrid::filled(5, 5, 0.5);
        assert_eq!(
            astar(&g, (0, 0), (5, 0), &SearchParams::default()),
            Err(SearchError::OutOfBounds(5, 0))
        );
    }

    #[test]
    fn admissible_heuristic_matches_dijkstra_with_wall() {
        // p = 0 wall with a single opening forces a detour
        let g = grid_from(20, 20, |x, y| if x == 10 && y != 17 { 0.0 } else { 1.0 });
        let params = SearchParams { hweight: 0.07, search_margin: 30, ..Default::default() };
        let a = astar(&g, (2, 2), (18, 2), &params).unwrap().found().unwrap();
        let d = dijkstra(&g, (2, 2), (18, 2), &params).unwrap().found().unwrap();
        assert!((a.cost - d.cost).abs() < 1e-9, "astar {} vs dijkstra {}", a.cost, d.cost);
    }

    #[test]
    fn dijkstra_matches_astar_hweight_zero() {
        for seed in 0..100u64 {
            let g = seeded_grid(16, 16, seed);
            let params = SearchParams { hweight: 0.0, search_margin: 20, ..Default::default() };
            let a = astar(&g, (1, 2), (14, 13), &params).unwrap().found().unwrap();
            let d = dijkstra(&g, (1, 2), (14, 13), &params).unwrap().found().unwrap();
            assert!((a.cost - d.cost).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn dijkstra_matches_brute_force_enumeration() {
        // exhaustive DFS over simple paths with branch-and-bound, small grids only
        fn brute(grid: &ScalarGrid, start: (i64, i64), goal: (i64, i64), base: f64) -> f64 {
            fn dfs(
                grid: &ScalarGrid,
                cur: (i64, i64),
                goal: (i64, i64),
                base: f64,
                visited: &mut Vec<(i64, i64)>,
                cost: f64,
                best: &mut f64,
            ) {
                if cost >= *best {
                    return;
                }
                if cur == goal {
                    *best = cost;
                    return;
                }
                for &(dx, dy) in &OFF8 {
                    let np = (cur.0 + dx, cur.1 + dy);
                    if !grid.in_bounds(np.0, np.1) || visited.contains(&np) {
                        continue;
                    }
                    visited.push(np);
                    let step = base - grid.get(np.0 as usize, np.1 as usize);
                    dfs(grid, np, goal, base, visited, cost + step, best);
                    visited.pop();
                }
            }
            let mut best = f64::INFINITY;
            let mut visited = vec![start];
            dfs(grid, start, goal, base, &mut visited, 0.0, &mut best);
            best
        }

        for seed in 0..5u64 {
            let g = seeded_grid(5, 5, seed + 77);
            let params = SearchParams { search_margin: 10, ..Default::default() };
            let d = dijkstra(&g, (0, 0), (4, 4), &params).unwrap().found().unwrap();
            let expect = brute(&g, (0, 0), (4, 4), params.base);
            assert!((d.cost - expect).abs() < 1e-9, "seed {seed}: {} vs {expect}", d.cost);
        }
    }

    #[test]
    fn uniform_grid_diagonal_chebyshev() {
        let g = ScalarGrid::filled(6, 6, 1.0);
        let params = SearchParams { search_margin: 10, ..Default::default() };
        let d = dijkstra(&g, (0, 0), (5, 3), &params).unwrap().found().unwrap();
        // Chebyshev distance 5, every pixel entered costs 0.1
        assert!((d.cost - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unreachable_outside_region() {
        let g = ScalarGrid::filled(50, 3, 1.0);
        // margin 0 restricts the region to the segment between the endpoints; a
        // goal on another row with margin 0 is still reachable, so instead cap
        // expansions to force CapExhausted and shrink region for Unreachable.
        let params = SearchParams { search_margin: 0, max_expansions: 3, ..Default::default() };
        match dijkstra(&g, (0, 0), (49, 0), &params).unwrap() {
            SearchOutcome::CapExhausted => {}
            other => panic!("expected CapExhausted, got {other:?}"),
        }
    }

    #[test]
    fn dijkstra_symmetric_costs() {
        for seed in 0..10u64 {
            let g = seeded_grid(12, 12, seed + 1000);
            let params = SearchParams { search_margin: 20, ..Default::default() };
            let ab = dijkstra(&g, (0, 0), (11, 11), &params).unwrap().found().unwrap();
            let ba = dijkstra(&g, (11, 11), (0, 0), &params).unwrap().found().unwrap();
            // costs differ by the endpoint pixels (start free, goal charged)
            let pa = g.get(0, 0);
            let pb = g.get(11, 11);
            let adj = ab.cost - (params.base - pb) + (params.base - pa);
            assert!((adj - ba.cost).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn path_cost_cases() {
        let g = grid_from(3, 1, |x, _| [1.0, 1.0, 0.5][x]);
        assert_eq!(path_cost(&g, &[(0, 0)], 1.1).unwrap(), 0.0);
        let c = path_cost(&g, &[(0, 0), (1, 0), (2, 0)], 1.1).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
        assert!(matches!(
            path_cost(&g, &[(0, 0), (2, 0)], 1.1),
            Err(SearchError::NotAdjacent(..))
        ));
        assert!(matches!(path_cost(&g, &[], 1.1), Err(SearchError::EmptyPolyline)));
    }

    #[test]
    fn returned_cost_matches_recomputation() {
        for seed in 0..20u64 {
            let g = seeded_grid(24, 24, seed + 31);
            let params = SearchParams { search_margin: 30, ..Default::default() };
            let r = astar(&g, (1, 1), (22, 20), &params).unwrap().found().unwrap();
            let rc = path_cost(&g, &r.polyline, params.base).unwrap();
            assert!((r.cost - rc).abs() < 1e-9);
        }
    }
}
