#![allow(dead_code)]

use hyperpm::rng::seeded;
use hyperpm::Hypergraph;
use itertools::Itertools;
use rand::Rng;

/// Each k-set of `[n]` kept independently with probability `density`.
pub fn random_graph(n: usize, k: usize, density: f64, seed: u64) -> Hypergraph {
    let mut rng = seeded(seed);
    let edges = (0..n)
        .combinations(k)
        .filter(|_| rng.gen::<f64>() < density)
        .collect();
    Hypergraph::new(k, n, edges).unwrap()
}

/// Edge-disjoint perfect matchings of K_{mk}: shifted partitions of `[n]`.
pub fn matching_from_partition(g: &Hypergraph, parts: &[Vec<usize>]) -> Vec<f64> {
    let mut w = vec![0.0; g.num_edges()];
    for p in parts {
        let mut p = p.clone();
        p.sort_unstable();
        w[g.edge_id(&p).unwrap()] = 1.0;
    }
    w
}

/// A uniformly random partition of `[n]` into blocks of size `k`.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut seeded(seed));
    v.chunks(k).map(|c| c.to_vec()).collect()
}

pub fn oracle_graph() -> Hypergraph {
    let mut edges: Vec<Vec<usize>> = (0..8)
        .flat_map(|i| [vec![i, (i + 1) % 8], vec![i, (i + 2) % 8]])
        .collect();
    edges.extend([vec![0, 4], vec![1, 5], vec![2, 6], vec![0, 3]]);
    Hypergraph::new(2, 8, edges).unwrap()
}
