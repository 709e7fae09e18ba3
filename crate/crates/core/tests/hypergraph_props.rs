mod common;

use common::random_graph;
use hyperpm::combin::binomial_u128;
use hyperpm::hypergraph::gen_random_dirac;
use hyperpm::{AlphaTable, DiracParams};
use itertools::Itertools;
use num_rational::Ratio;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_degrees_are_nonincreasing(
        n in 5usize..=9,
        k in 2usize..=4,
        density in 0.2f64..1.0,
        seed in any::<u64>(),
    ) {
        let g = random_graph(n, k, density, seed);
        let profile = g.degree_ratio_profile().unwrap();
        prop_assert_eq!(profile.len(), k);
        for w in profile.windows(2) {
            prop_assert!(w[0] >= w[1], "{:?}", profile);
        }
        for (i, r) in profile.iter().enumerate() {
            let c = binomial_u128((n - i) as u64, (k - i) as u64).unwrap();
            prop_assert_eq!(*r, Ratio::new(g.min_d_degree(i).unwrap() as u128, c));
        }
    }

    #[test]
    fn degree_matches_brute_force(
        n in 4usize..=10,
        k in 2usize..=4,
        density in 0.1f64..1.0,
        seed in any::<u64>(),
    ) {
        let g = random_graph(n, k, density, seed);
        prop_assert!(g.incidence_consistent());
        for s in 0..k {
            for set in (0..n).combinations(s) {
                let brute = g
                    .edges()
                    .iter()
                    .filter(|e| set.iter().all(|v| e.contains(v)))
                    .count();
                prop_assert_eq!(g.degree(&set).unwrap(), brute);
            }
        }
    }

    #[test]
    fn dirac_implies_half_threshold(
        m in 2usize..=4,
        d in 1usize..=2,
        gamma in 0.01f64..0.3,
        density in 0.5f64..1.0,
        seed in any::<u64>(),
    ) {
        let (k, n) = (3, 3 * m);
        let g = random_graph(n, k, density, seed);
        let params = DiracParams::new(d, gamma).unwrap();
        let alpha = AlphaTable::default().with_entry(1, 3, Ratio::new(5, 9)).unwrap();
        if g.is_dirac(&params, &alpha).unwrap() {
            let c = binomial_u128((n - d) as u64, (k - d) as u64).unwrap();
            prop_assert!(2 * g.min_d_degree(d).unwrap() as u128 >= c);
        }
    }
}

#[test]
fn generator_is_pure_in_seed() {
    let params = DiracParams::new(2, 0.1).unwrap();
    let alpha = AlphaTable::default();
    let a = gen_random_dirac(9, 3, &params, 0.9, 17, &alpha, 50).unwrap();
    let b = gen_random_dirac(9, 3, &params, 0.9, 17, &alpha, 50).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.digest(), b.digest());
    assert!(a.is_dirac(&params, &alpha).unwrap());
    let c = gen_random_dirac(9, 3, &params, 0.9, 18, &alpha, 50).unwrap();
    assert_ne!(a, c);
}
