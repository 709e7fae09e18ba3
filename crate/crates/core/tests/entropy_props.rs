mod common;

use common::{matching_from_partition, oracle_graph, random_partition};
use hyperpm::entropy::{
    convex_combine, is_fractional_pm, jensen_bounds, max_entropy_fpm, plogp, FEAS_TOL,
};
use hyperpm::{EdgeWeights, Hypergraph};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Independently computed optimum for the oracle graph.
const ORACLE_ENTROPY: f64 = 6.380282761580396;

/// Newton's method on the dual `Σ_e exp(Σ_{v∈e} λ_v − 1) − Σ_v λ_v`.
fn newton_dual(g: &Hypergraph) -> Vec<f64> {
    let (n, m) = (g.n(), g.num_edges());
    let mut a = DMatrix::<f64>::zeros(n, m);
    for (id, e) in g.edges().iter().enumerate() {
        for &v in e {
            a[(v, id)] = 1.0;
        }
    }
    let weights =
        |lam: &DVector<f64>| -> DVector<f64> { (a.transpose() * lam).map(|s| (s - 1.0).exp()) };
    let objective = |lam: &DVector<f64>| weights(lam).sum() - lam.sum();
    let mut lam = DVector::<f64>::zeros(n);
    for _ in 0..200 {
        let x = weights(&lam);
        let grad = &a * &x - DVector::from_element(n, 1.0);
        if grad.amax() < 1e-14 {
            break;
        }
        let hess = &a * DMatrix::from_diagonal(&x) * a.transpose();
        let step = hess.lu().solve(&grad).expect("nonsingular Hessian");
        let mut t = 1.0;
        let f0 = objective(&lam);
        while objective(&(&lam - t * &step)) > f0 - 1e-4 * t * grad.dot(&step) && t > 1e-12 {
            t /= 2.0;
        }
        lam -= t * step;
    }
    weights(&lam).iter().copied().collect()
}

#[test]
fn solver_matches_oracle_value_and_newton_dual() {
    let g = oracle_graph();
    let (x, rep) = max_entropy_fpm(&g, 1e-12, 100_000).unwrap();
    assert!(rep.converged);
    assert!((rep.entropy - ORACLE_ENTROPY).abs() < 1e-6);
    let newton = newton_dual(&g);
    assert!(is_fractional_pm(&g, &newton, 1e-12).unwrap().ok);
    let h_newton: f64 = newton.iter().map(|&w| plogp(w)).sum();
    assert!((h_newton - ORACLE_ENTROPY).abs() < 1e-9);
    for (a, b) in x.weights().iter().zip(&newton) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn solver_dominates_hand_built_matchings() {
    let g = oracle_graph();
    let pm = |pairs: &[[usize; 2]]| {
        let mut w = vec![0.0; g.num_edges()];
        for p in pairs {
            w[g.edge_id(p).unwrap()] = 1.0;
        }
        EdgeWeights::verified(&g, w, FEAS_TOL).unwrap()
    };
    let a = pm(&[[0, 1], [2, 3], [4, 5], [6, 7]]);
    let b = pm(&[[1, 2], [3, 4], [5, 6], [0, 7]]);
    let c = pm(&[[0, 2], [1, 3], [4, 6], [5, 7]]);
    let (_, rep) = max_entropy_fpm(&g, 1e-12, 100_000).unwrap();
    let ab = convex_combine(&a, &b, 0.5).unwrap();
    let abc = convex_combine(&ab, &c, 1.0 / 3.0).unwrap();
    for x in [&a, &b, &c, &ab, &abc] {
        assert!(rep.entropy >= x.entropy() - 1e-6);
    }

    let k9 = Hypergraph::complete(9, 3).unwrap();
    let (opt, rep) = max_entropy_fpm(&k9, 1e-12, 10_000).unwrap();
    let uniform = 1.0 / 28.0;
    assert!(opt.weights().iter().all(|&w| (w - uniform).abs() < 1e-10));
    let mut mix = EdgeWeights::verified(
        &k9,
        matching_from_partition(&k9, &random_partition(9, 3, 1)),
        FEAS_TOL,
    )
    .unwrap();
    for s in 2..6 {
        let next = EdgeWeights::verified(
            &k9,
            matching_from_partition(&k9, &random_partition(9, 3, s)),
            FEAS_TOL,
        )
        .unwrap();
        mix = convex_combine(&mix, &next, 1.0 / s as f64).unwrap();
        assert!(rep.entropy >= mix.entropy() - 1e-6);
    }
}

#[test]
fn solver_output_is_capped_and_below_jensen() {
    for (n, k) in [(6, 2), (6, 3), (8, 4), (9, 3)] {
        let g = Hypergraph::complete(n, k).unwrap();
        let (x, rep) = max_entropy_fpm(&g, 1e-10, 10_000).unwrap();
        assert!(x.max_weight() <= 1.0);
        let (upper, _) = jensen_bounds(&g, x.max_weight());
        assert!(rep.entropy <= upper + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn entropy_is_concave_on_matchings(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let g = Hypergraph::complete(9, 3).unwrap();
        let ind = |s| EdgeWeights::verified(
            &g,
            matching_from_partition(&g, &random_partition(9, 3, s)),
            FEAS_TOL,
        )
        .unwrap();
        let x1 = ind(s1);
        let x2 = convex_combine(&ind(s2), &ind(s3), 0.5).unwrap();
        for t in [0.25, 0.5, 0.75] {
            let mid = convex_combine(&x1, &x2, t).unwrap();
            prop_assert!(mid.entropy() >= (1.0 - t) * x1.entropy() + t * x2.entropy() - 1e-9);
            let (upper, _) = jensen_bounds(&g, mid.max_weight());
            prop_assert!(mid.entropy() <= upper);
            prop_assert!(is_fractional_pm(&g, mid.weights(), 1e-12).unwrap().ok);
        }
    }
}
