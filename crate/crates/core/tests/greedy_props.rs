mod common;

use std::path::PathBuf;

use common::random_graph;
use hyperpm::entropy::max_entropy_fpm;
use hyperpm::greedy::{
    per_step_entropy_candidates, GreedyPlan, StopReason, StopRule, TrajectoryConfig,
};
use hyperpm::{EdgeWeights, Hypergraph};

fn until_freeze() -> TrajectoryConfig {
    TrajectoryConfig {
        stop: StopRule::UntilFreeze,
        ..TrajectoryConfig::default()
    }
}

fn uniform(g: &Hypergraph) -> EdgeWeights {
    let w = 1.0 / hyperpm::combin::binomial_f64(g.n() - 1, g.k() - 1);
    EdgeWeights::verified(g, vec![w; g.num_edges()], 1e-9).unwrap()
}

/// Dense random 3-graph on 12 vertices with its max-entropy weights.
fn dense_instance() -> (Hypergraph, EdgeWeights) {
    let g = random_graph(12, 3, 0.85, 5);
    let (x, rep) = max_entropy_fpm(&g, 1e-12, 100_000).unwrap();
    assert!(rep.converged);
    (g, x)
}

#[test]
fn residual_graph_is_consistent_after_every_step() {
    let (g, x) = dense_instance();
    let plan = GreedyPlan::new(&g, &x, &until_freeze()).unwrap();
    let w = x.weights();
    for seed in 0..40 {
        let t = plan.run(seed);
        let mut dead = vec![false; g.n()];
        for (step, r) in t.records.iter().enumerate() {
            if let Some(e) = r.chosen_edge {
                for &v in g.edge(e) {
                    assert!(!dead[v], "chosen edge reuses vertex {v}");
                    dead[v] = true;
                }
            }
            assert_eq!(r.i, step);
            let alive: Vec<usize> = (0..g.num_edges())
                .filter(|&id| g.edge(id).iter().all(|&v| !dead[v]))
                .collect();
            let weight: f64 = alive.iter().map(|&id| w[id]).sum();
            assert!((weight - r.residual_weight).abs() < 1e-12);
            for (sid, s) in plan.tracked().iter().enumerate() {
                if s.iter().all(|&v| !dead[v]) {
                    let deg = alive
                        .iter()
                        .filter(|&&id| s.iter().all(|v| g.edge(id).contains(v)))
                        .count();
                    assert_eq!(r.degrees[sid], deg as u64);
                }
            }
        }
        if t.stop == StopReason::NoPositiveWeightEdge {
            for id in 0..g.num_edges() {
                if g.edge(id).iter().all(|&v| !dead[v]) {
                    assert_eq!(w[id], 0.0);
                }
            }
        }
        for pair in t.records.windows(2) {
            assert!(pair[1].residual_weight <= pair[0].residual_weight);
            assert!(pair[1].residual_entropy <= pair[0].residual_entropy);
        }
    }
}

#[test]
fn fraction_rule_stops_past_the_horizon() {
    let g = Hypergraph::complete(30, 3).unwrap();
    let x = uniform(&g);
    let cfg = TrajectoryConfig {
        c: 0.5,
        ..TrajectoryConfig::default()
    };
    let plan = GreedyPlan::new(&g, &x, &cfg).unwrap();
    let t = plan.run(1);
    let horizon = cfg.horizon(30, 3);
    assert_eq!(t.stop, StopReason::StepLimit);
    assert_eq!(t.chosen.len(), horizon.floor() as usize + 1);
    let runs = plan.run_many(&[1, 2, 3]);
    assert_eq!(runs[0], t);
}

/// Chosen edge ids for seed 7 on `K_12^(3)` with uniform weights, one per line.
fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/greedy_k12_seed7.txt")
}

#[test]
fn chosen_sequence_matches_golden_file() {
    let g = Hypergraph::complete(12, 3).unwrap();
    let x = uniform(&g);
    let plan = GreedyPlan::new(&g, &x, &until_freeze()).unwrap();
    let got: Vec<String> = plan.run(7).chosen.iter().map(|id| id.to_string()).collect();
    let text = got.join("\n") + "\n";
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path(), &text).unwrap();
    }
    let expected = std::fs::read_to_string(golden_path()).unwrap();
    assert_eq!(text, expected);
}

#[test]
fn per_step_entropy_follows_second_candidate() {
    for (g, x) in [
        {
            let g = Hypergraph::complete(30, 3).unwrap();
            let x = uniform(&g);
            (g, x)
        },
        dense_instance(),
    ] {
        let cfg = TrajectoryConfig {
            c: 0.5,
            ..TrajectoryConfig::default()
        };
        let plan = GreedyPlan::new(&g, &x, &cfg).unwrap();
        let (n, k) = (g.n(), g.k());
        let horizon = cfg.horizon(n, k);
        let seeds: Vec<u64> = (0..64).collect();
        let runs = plan.run_many(&seeds);
        let mut i = 0;
        while (i as f64) <= horizon {
            let emp: Vec<f64> = runs
                .iter()
                .filter_map(|t| t.records.get(i))
                .map(|r| r.residual_entropy / r.residual_weight + r.residual_weight.ln())
                .collect();
            let mean = emp.iter().sum::<f64>() / emp.len() as f64;
            let (a, b) = per_step_entropy_candidates(x.entropy(), n, k, i);
            assert!(
                (mean - b).abs() < (mean - a).abs(),
                "step {i}: {mean} vs A={a}, B={b}"
            );
            if i == 0 {
                assert!((mean - b).abs() < 1e-9);
            }
            i += 1;
        }
    }
}
