//! End-to-end pipeline checks on synthetic fixtures: extraction quality,
//! heuristic suboptimality, and the node-spacing guarantee.

use delin_core::astar::{astar, dijkstra, SearchParams};
use delin_core::graph::{build_overcomplete_graph, ExtractParams, NodeKind};
use delin_core::metrics::{evaluate, MatchTarget};
use delin_core::scoring::{prune, score_graph, ScorerSpec};
use delin_core::synth::{gen_network, render_mask, render_tubularity, SplitMix64, SynthParams};
use delin_core::ScalarGrid;

fn random_grid(rng: &mut SplitMix64, side: usize) -> ScalarGrid {
    let values = (0..side * side).map(|_| rng.next_f64()).collect();
    ScalarGrid::new(side, side, values).unwrap()
}

#[test]
fn weighted_astar_never_undercuts_dijkstra() {
    let mut rng = SplitMix64::new(99);
    let params = SearchParams { search_margin: 64, ..Default::default() };
    for _ in 0..10 {
        let grid = random_grid(&mut rng, 48);
        for _ in 0..10 {
            let start = (rng.next_below(48) as i64, rng.next_below(48) as i64);
            let goal = (rng.next_below(48) as i64, rng.next_below(48) as i64);
            let a = astar(&grid, start, goal, &params).unwrap().found().unwrap();
            let d = dijkstra(&grid, start, goal, &params).unwrap().found().unwrap();
            assert!(a.cost >= d.cost - 1e-9, "astar undercut the optimum");
        }
    }
}

#[test]
fn synthetic_recovery_single_seed() {
    let sp = SynthParams::new(0);
    let gt = gen_network(&sp);
    let mask = render_mask(&gt, sp.width, sp.extent);
    let tub = render_tubularity(&mask, sp.sigma, sp.noise_amp, sp.seed);

    let params = ExtractParams::with_d_k(30, 1.5);
    let over = build_overcomplete_graph(&tub, &params).unwrap();
    assert!(!over.edges.is_empty());
    let scored = score_graph(&tub, &over, &ScorerSpec::MeanTubularity, 256).unwrap();
    let pruned = prune(&scored, 0.5).unwrap();

    let report = evaluate(&gt, &pruned, 10.0, &[3.0], MatchTarget::All).unwrap();
    let t = &report.topo[0];
    eprintln!(
        "seed 0: precision {:.4} recall {:.4} median NPD {:.4} ({} pairs)",
        t.precision,
        t.recall,
        report.npd.median(),
        report.npd.scores.len()
    );
    assert!(t.precision >= 0.95, "precision {}", t.precision);
    assert!(t.recall >= 0.95, "recall {}", t.recall);
    assert!(report.npd.median() <= 0.05, "median NPD {}", report.npd.median());
}

#[test]
fn grid_sample_spacing_guarantee() {
    let params = ExtractParams::with_d_k(30, 1.5);
    for seed in 0..3u64 {
        let sp = SynthParams::new(seed);
        let gt = gen_network(&sp);
        let mask = render_mask(&gt, sp.width, sp.extent);
        let tub = render_tubularity(&mask, sp.sigma, sp.noise_amp, sp.seed);
        let g = build_overcomplete_graph(&tub, &params).unwrap();
        for n in &g.nodes {
            if n.kind != NodeKind::GridSample {
                continue;
            }
            for o in &g.nodes {
                if o.id == n.id {
                    continue;
                }
                let dx = (n.coord.0 - o.coord.0) as f64;
                let dy = (n.coord.1 - o.coord.1) as f64;
                let d = (dx * dx + dy * dy).sqrt();
                assert!(
                    d >= params.epsilon,
                    "seed {seed}: nodes {} and {} at distance {d}",
                    n.id,
                    o.id
                );
            }
        }
    }
}

