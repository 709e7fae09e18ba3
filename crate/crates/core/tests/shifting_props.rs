mod common;

use common::{matching_from_partition, random_partition};
use hyperpm::entropy::{convex_combine, vertex_sums, FEAS_TOL};
use hyperpm::rng::seeded;
use hyperpm::shifting::{
    anneal_and_shift, apply_shift, find_shifting_structure, shift_gain_lower_bound, AnnealParams,
    AnnealStop,
};
use hyperpm::{EdgeWeights, Hypergraph};
use rand::Rng;

/// Uniform weights mixed with three random perfect matchings.
fn random_fpm(g: &Hypergraph, seed: u64) -> EdgeWeights {
    let uniform = 1.0 / hyperpm::combin::binomial_f64(g.n() - 1, g.k() - 1);
    let mut x = EdgeWeights::verified(g, vec![uniform; g.num_edges()], 1e-12).unwrap();
    let mut rng = seeded(seed);
    for j in 0..3 {
        let pm = matching_from_partition(g, &random_partition(g.n(), g.k(), seed ^ (j + 1)));
        let pm = EdgeWeights::verified(g, pm, FEAS_TOL).unwrap();
        x = convex_combine(&x, &pm, rng.gen_range(0.0..0.5)).unwrap();
    }
    x
}

#[test]
fn entropy_gain_lemma_on_random_instances() {
    let g = Hypergraph::complete(9, 3).unwrap();
    let mut rng = seeded(2024);
    let mut checked = 0;
    while checked < 1000 {
        let x = random_fpm(&g, rng.gen());
        let e = rng.gen_range(0..g.num_edges());
        let f = rng.gen_range(0..g.num_edges());
        let shared = g.edge(e).iter().filter(|v| g.edge(f).contains(v)).count();
        if shared != 1 {
            continue;
        }
        let s = find_shifting_structure(&g, e, f, false).unwrap().unwrap();
        s.validate(&g).unwrap();
        let w = x.weights();
        let min_e = s
            .e_ids
            .iter()
            .map(|&id| w[id])
            .fold(f64::INFINITY, f64::min);
        let max_f = s.f_ids.iter().map(|&id| w[id]).fold(0.0, f64::max);
        let delta = rng.gen_range(0.0..=1.0) * min_e / 2.0;
        if delta <= 0.0 {
            continue;
        }
        let eta = max_f + delta + rng.gen_range(0.0..0.5);
        let bound = shift_gain_lower_bound(w, &s, delta, eta).unwrap();
        let y = apply_shift(&x, &s, delta).unwrap();
        assert!(
            y.entropy() - x.entropy() >= bound - 1e-9,
            "gain {} below bound {bound}",
            y.entropy() - x.entropy()
        );
        let (before, after) = (
            vertex_sums(&g, w).unwrap(),
            vertex_sums(&g, y.weights()).unwrap(),
        );
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-12);
        }
        checked += 1;
    }
}

#[test]
fn returned_structures_are_valid() {
    for (n, k) in [(8, 2), (9, 3), (12, 3), (16, 4)] {
        let g = Hypergraph::complete(n, k).unwrap();
        let mut rng = seeded(n as u64);
        let mut found = 0;
        for _ in 0..200 {
            let (e, f) = (
                rng.gen_range(0..g.num_edges()),
                rng.gen_range(0..g.num_edges()),
            );
            let shared = g.edge(e).iter().filter(|v| g.edge(f).contains(v)).count();
            match find_shifting_structure(&g, e, f, true) {
                Ok(Some(s)) => {
                    s.validate(&g).unwrap();
                    assert_eq!(s.e_ids.len(), k);
                    found += 1;
                }
                Ok(None) => {}
                Err(_) => assert_ne!(shared, 1),
            }
        }
        assert!(found > 0, "({n},{k})");
    }
}

#[test]
fn anneal_trace_on_k9_matching_mixture() {
    let g = Hypergraph::complete(9, 3).unwrap();
    let pms: Vec<EdgeWeights> = (0..3)
        .map(|s| {
            EdgeWeights::verified(
                &g,
                matching_from_partition(&g, &random_partition(9, 3, s)),
                FEAS_TOL,
            )
            .unwrap()
        })
        .collect();
    let x_star = convex_combine(
        &convex_combine(&pms[0], &pms[1], 0.5).unwrap(),
        &pms[2],
        1.0 / 3.0,
    )
    .unwrap();
    let x_hat = EdgeWeights::verified(&g, vec![1.0 / 28.0; g.num_edges()], 1e-12).unwrap();
    let p = AnnealParams::new(&g, 0.1, 0.8, 3.0, 100_000).unwrap();
    let r = anneal_and_shift(&g, &x_star, &x_hat, &p).unwrap();
    assert_ne!(r.stop, AnnealStop::StepLimit);
    assert!(!r.steps.is_empty());
    assert!(r.weights.is_verified());
    assert!(r.min_weight >= p.delta * (1.0 - 1e-9));
    let sums = vertex_sums(&g, r.weights.weights()).unwrap();
    assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-9));
    for w in r.steps.windows(2) {
        assert!((w[0].entropy_after - w[1].entropy_before).abs() < 1e-9);
    }
    for s in &r.steps {
        assert!(s.entropy_after - s.entropy_before >= s.bound - 1e-9);
    }
    assert!(r.weights.entropy() >= r.x0_entropy);
    let per_step = p.delta * p.d.ln() / 2.0;
    if r.steps.iter().all(|s| s.bound >= per_step) {
        assert!(r.steps.len() as f64 <= r.step_budget(g.n(), &p));
    }
}
