//! k-uniform hypergraphs, minimum-degree diagnostics, the Dirac condition and
//! instance generators.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use itertools::Itertools;
use num_rational::Ratio;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::combin::{binomial_f64, binomial_u128};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, seeded};

/// Default budget of subset-edge checks for [`Hypergraph::min_d_degree`].
pub const DEFAULT_WORK_LIMIT: u128 = 100_000_000;

/// A k-uniform hypergraph on vertices `0..n`.
///
/// Edges are stored with their vertices sorted ascending and their position in
/// the edge list is their id; weight vectors elsewhere in the crate are indexed
/// by that id.
#[derive(Clone)]
pub struct Hypergraph {
    k: usize,
    n: usize,
    edges: Vec<Vec<usize>>,
    incidence: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl PartialEq for Hypergraph {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.n == other.n && self.edges == other.edges
    }
}

impl Eq for Hypergraph {}

impl fmt::Debug for Hypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hypergraph")
            .field("k", &self.k)
            .field("n", &self.n)
            .field("edges", &self.edges.len())
            .finish()
    }
}

impl Hypergraph {
    /// Builds a hypergraph, sorting the vertices of every edge.
    ///
    /// Fails on edges of the wrong size, repeated or out-of-range vertices and
    /// duplicate edges. Edge order is preserved.
    pub fn new(k: usize, n: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        if k < 1 {
            return invalid("uniformity k must be at least 1");
        }
        let mut lookup = HashMap::with_capacity(edges.len());
        let mut sorted_edges = Vec::with_capacity(edges.len());
        for (id, mut e) in edges.into_iter().enumerate() {
            e.sort_unstable();
            Self::check_edge(k, n, &e)
                .map_err(|msg| Error::InvalidArgument(format!("edge {id}: {msg}")))?;
            if lookup.insert(e.clone(), id).is_some() {
                return invalid(format!("edge {id} {e:?} is a duplicate"));
            }
            sorted_edges.push(e);
        }
        let incidence = build_incidence(n, &sorted_edges);
        Ok(Self {
            k,
            n,
            edges: sorted_edges,
            incidence,
            lookup,
        })
    }

    pub(crate) fn check_edge(k: usize, n: usize, e: &[usize]) -> std::result::Result<(), String> {
        if e.len() != k {
            return Err(format!("has {} vertices, expected {k}", e.len()));
        }
        if let Some(&v) = e.iter().find(|&&v| v >= n) {
            return Err(format!("vertex {v} out of range [0, {n})"));
        }
        if e.windows(2).any(|w| w[0] == w[1]) {
            return Err("repeats a vertex".into());
        }
        Ok(())
    }

    /// The complete k-graph `K_n^(k)`, edges in lexicographic order.
    pub fn complete(n: usize, k: usize) -> Result<Self> {
        if k < 1 || k > n {
            return invalid(format!(
                "complete graph needs 1 <= k <= n, got k={k}, n={n}"
            ));
        }
        Self::new(k, n, (0..n).combinations(k).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &[usize] {
        &self.edges[id]
    }

    /// Ids of the edges containing `v`, ascending.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    /// Id of the edge with exactly these (sorted) vertices.
    pub fn edge_id(&self, sorted: &[usize]) -> Option<usize> {
        self.lookup.get(sorted).copied()
    }

    /// Rebuilds the incidence index and compares it with the stored one.
    pub fn incidence_consistent(&self) -> bool {
        build_incidence(self.n, &self.edges) == self.incidence
    }

    /// Copy of the graph without the given edge ids (remaining order kept).
    pub fn without_edges(&self, remove: &[usize]) -> Self {
        let drop: std::collections::HashSet<usize> = remove.iter().copied().collect();
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(id, _)| !drop.contains(id))
            .map(|(_, e)| e.clone())
            .collect();
        Self::new(self.k, self.n, edges).expect("subgraph of a valid graph")
    }

    /// Canonical `.khg` text: header `k n` and one edge per line.
    pub fn to_khg_string(&self) -> String {
        let mut out = format!("{} {}\n", self.k, self.n);
        for e in &self.edges {
            out.push_str(&e.iter().join(" "));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_khg_string().as_bytes()))
    }

    /// Number of edges containing the vertex set `s`.
    pub fn degree(&self, s: &[usize]) -> Result<usize> {
        if s.len() >= self.k {
            return invalid(format!(
                "|S| = {} must be at most k-1 = {}",
                s.len(),
                self.k - 1
            ));
        }
        let mut set = s.to_vec();
        set.sort_unstable();
        if let Some(&v) = set.iter().find(|&&v| v >= self.n) {
            return invalid(format!("vertex {v} out of range [0, {})", self.n));
        }
        if set.windows(2).any(|w| w[0] == w[1]) {
            return invalid("S repeats a vertex");
        }
        Ok(self.degree_unchecked(&set))
    }

    pub(crate) fn degree_unchecked(&self, sorted: &[usize]) -> usize {
        let Some(&pivot) = sorted.iter().min_by_key(|&&v| self.incidence[v].len()) else {
            return self.edges.len();
        };
        self.incidence[pivot]
            .iter()
            .filter(|&&id| is_subset(sorted, &self.edges[id]))
            .count()
    }

    /// Minimum degree over all `d`-sets, with the default work limit.
    pub fn min_d_degree(&self, d: usize) -> Result<usize> {
        self.min_d_degree_limited(d, DEFAULT_WORK_LIMIT)
    }

    pub fn min_d_degree_limited(&self, d: usize, work_limit: u128) -> Result<usize> {
        if d >= self.k {
            return invalid(format!("d = {d} must be at most k-1 = {}", self.k - 1));
        }
        if d == 0 {
            return Ok(self.edges.len());
        }
        if d > self.n {
            return invalid(format!("d = {d} exceeds n = {}", self.n));
        }
        let max_deg = self.incidence.iter().map(Vec::len).max().unwrap_or(0) as u128;
        let subsets = binomial_u128(self.n as u64, d as u64).unwrap_or(u128::MAX);
        let work = subsets.saturating_mul(max_deg.max(1));
        if work > work_limit {
            return Err(Error::Resource(format!(
                "min_d_degree(d={d}) needs ~{work} subset-edge checks, limit {work_limit}"
            )));
        }
        Ok((0..self.n)
            .combinations(d)
            .map(|s| self.degree_unchecked(&s))
            .min()
            .unwrap_or(0))
    }

    /// `(δ_0/C(n,k), δ_1/C(n−1,k−1), …, δ_{k−1}/C(n−k+1,1))` as exact ratios.
    pub fn degree_ratio_profile(&self) -> Result<Vec<Ratio<u128>>> {
        (0..self.k)
            .map(|d| {
                let delta = self.min_d_degree(d)? as u128;
                let denom = binomial_u128((self.n - d) as u64, (self.k - d) as u64)
                    .ok_or_else(|| Error::Resource("binomial overflow".into()))?;
                Ok(if denom == 0 {
                    Ratio::from_integer(0)
                } else {
                    Ratio::new(delta, denom)
                })
            })
            .collect()
    }

    /// `(d, γ)`-Dirac test: `k | n` and `δ_d ≥ (α_d(k) + γ)·C(n−d, k−d)`.
    pub fn is_dirac(&self, params: &DiracParams, alpha: &AlphaTable) -> Result<bool> {
        params.check(self.k)?;
        let a = alpha.get(params.d, self.k)?;
        if self.n % self.k != 0 {
            return Ok(false);
        }
        let delta = self.min_d_degree(params.d)?;
        Ok(delta as f64 >= dirac_threshold(self.n, self.k, params, a))
    }
}

fn build_incidence(n: usize, edges: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut incidence = vec![Vec::new(); n];
    for (id, e) in edges.iter().enumerate() {
        for &v in e {
            incidence[v].push(id);
        }
    }
    incidence
}

/// Both slices sorted ascending.
pub(crate) fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut it = big.iter();
    small.iter().all(|v| it.any(|w| w == v))
}

/// `(α + γ)·C(n−d, k−d)`, shrunk by a relative `1e-12` so that exact
/// boundary cases are not lost to rounding of `α + γ`.
pub fn dirac_threshold(n: usize, k: usize, params: &DiracParams, alpha: Ratio<u64>) -> f64 {
    let a = *alpha.numer() as f64 / *alpha.denom() as f64;
    (a + params.gamma) * binomial_f64(n - params.d, k - params.d) * (1.0 - 1e-12)
}

/// Degree order `d` and slack `γ` of a Dirac condition.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiracParams {
    pub d: usize,
    pub gamma: f64,
}

impl DiracParams {
    pub fn new(d: usize, gamma: f64) -> Result<Self> {
        if d < 1 {
            return invalid("d must be at least 1");
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return invalid(format!("gamma must be positive, got {gamma}"));
        }
        Ok(Self { d, gamma })
    }

    pub fn check(&self, k: usize) -> Result<()> {
        if self.d < 1 || self.d >= k {
            return invalid(format!(
                "d = {} must satisfy 1 <= d <= k-1 = {}",
                self.d,
                k - 1
            ));
        }
        if !(self.gamma > 0.0) {
            return invalid(format!("gamma must be positive, got {}", self.gamma));
        }
        Ok(())
    }
}

/// Asymptotic Dirac thresholds `α_d(k)`.
///
/// Built-in values are `1/2` for `d = k−1` and for `d ≥ 3k/8`; anything else
/// must be supplied explicitly. Lookups of unknown pairs fail.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlphaTable {
    overrides: BTreeMap<(usize, usize), Ratio<u64>>,
}

impl AlphaTable {
    pub fn builtin(d: usize, k: usize) -> Option<Ratio<u64>> {
        if d >= 1 && d < k && (d + 1 == k || 8 * d >= 3 * k) {
            Some(Ratio::new(1, 2))
        } else {
            None
        }
    }

    pub fn get(&self, d: usize, k: usize) -> Result<Ratio<u64>> {
        self.overrides
            .get(&(d, k))
            .copied()
            .or_else(|| Self::builtin(d, k))
            .ok_or_else(|| {
                Error::Config(format!(
                    "no alpha_d(k) value configured for (d, k) = ({d}, {k})"
                ))
            })
    }

    /// Adds or replaces `α_d(k)`.
    ///
    /// Values must lie in `[1/2, 1]` and, for fixed `k`, be nonincreasing in
    /// `d` across every known entry.
    pub fn with_entry(mut self, d: usize, k: usize, alpha: Ratio<u64>) -> Result<Self> {
        if d < 1 || d >= k {
            return Err(Error::Config(format!(
                "alpha entry ({d}, {k}) needs 1 <= d < k"
            )));
        }
        if alpha < Ratio::new(1, 2) || alpha > Ratio::from_integer(1) {
            return Err(Error::Config(format!(
                "alpha_{d}({k}) = {alpha} outside [1/2, 1]"
            )));
        }
        self.overrides.insert((d, k), alpha);
        let known: Vec<(usize, Ratio<u64>)> = (1..k)
            .filter_map(|dd| self.get(dd, k).ok().map(|a| (dd, a)))
            .collect();
        for w in known.windows(2) {
            if w[0].1 < w[1].1 {
                return Err(Error::Config(format!(
                    "alpha_{}({k}) = {} < alpha_{}({k}) = {}: thresholds must be nonincreasing in d",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(self)
    }

    /// Parses lines `d k alpha` (alpha as `p/q` or decimal); `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err("expected `d k alpha`"));
            }
            let d: usize = fields[0].parse().map_err(|_| parse_err("bad d"))?;
            let k: usize = fields[1].parse().map_err(|_| parse_err("bad k"))?;
            let alpha = parse_ratio(fields[2]).ok_or_else(|| parse_err("bad alpha"))?;
            table = table.with_entry(d, k, alpha)?;
        }
        Ok(table)
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), Ratio<u64>)> + '_ {
        self.overrides.iter().map(|(&key, &a)| (key, a))
    }
}

fn parse_ratio(s: &str) -> Option<Ratio<u64>> {
    if let Some((p, q)) = s.split_once('/') {
        let (p, q): (u64, u64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
        return (q != 0).then(|| Ratio::new(p, q));
    }
    // Decimal: digits after the point become the denominator power of ten.
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 18 {
        return None;
    }
    let den = 10u64.checked_pow(frac.len() as u32)?;
    let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_v: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    Some(Ratio::new(int.checked_mul(den)?.checked_add(frac_v)?, den))
}

/// Random `(d, γ)`-Dirac instance: each k-set (lexicographic order, one
/// `f64` draw each) is kept with probability `density`; attempt `a` uses seed
/// `derive_seed(seed, a)`. Retries up to `max_attempts` times.
pub fn gen_random_dirac(
    n: usize,
    k: usize,
    params: &DiracParams,
    density: f64,
    seed: u64,
    alpha: &AlphaTable,
    max_attempts: usize,
) -> Result<Hypergraph> {
    params.check(k)?;
    if n % k != 0 {
        return invalid(format!("k = {k} must divide n = {n}"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return invalid(format!("density must lie in (0, 1], got {density}"));
    }
    let a = alpha.get(params.d, k)?;
    let required = dirac_threshold(n, k, params, a);
    let mut best = 0usize;
    for attempt in 0..max_attempts {
        let mut rng = seeded(derive_seed(seed, attempt as u64));
        let edges: Vec<Vec<usize>> = (0..n)
            .combinations(k)
            .filter(|_| rng.gen::<f64>() < density)
            .collect();
        let g = Hypergraph::new(k, n, edges)?;
        let delta = g.min_d_degree(params.d)?;
        if delta as f64 >= required {
            return Ok(g);
        }
        best = best.max(delta);
    }
    Err(Error::GenerationFailure {
        attempts: max_attempts,
        d: params.d,
        achieved: best as u64,
        required,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k6() -> Hypergraph {
        Hypergraph::complete(6, 3).unwrap()
    }

    fn alpha13() -> AlphaTable {
        AlphaTable::default()
            .with_entry(1, 3, Ratio::new(5, 9))
            .unwrap()
    }

    #[test]
    fn degrees_of_complete_graph() {
        let g = k6();
        assert_eq!(g.degree(&[0]).unwrap(), 10);
        assert_eq!(g.degree(&[0, 1]).unwrap(), 4);
        assert_eq!(g.degree(&[]).unwrap(), 20);
        assert!(matches!(
            g.degree(&[0, 1, 2]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(g.degree(&[9]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn min_degrees() {
        let g = k6();
        assert_eq!(g.min_d_degree(1).unwrap(), 10);
        let minus = g.without_edges(&[0]);
        // Exhaustive: pairs inside the removed edge {0,1,2} lose one of 4.
        let brute = (0..6)
            .combinations(2)
            .map(|s| minus.degree(&s).unwrap())
            .min()
            .unwrap();
        assert_eq!(brute, 3);
        assert_eq!(minus.min_d_degree(2).unwrap(), 3);
        let isolated = Hypergraph::new(3, 7, (0..6).combinations(3).collect()).unwrap();
        assert_eq!(isolated.min_d_degree(1).unwrap(), 0);
        assert!(g.min_d_degree(3).is_err());
        assert!(matches!(
            g.min_d_degree_limited(2, 10),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn ratio_profiles() {
        let one = Ratio::from_integer(1u128);
        assert_eq!(k6().degree_ratio_profile().unwrap(), vec![one; 3]);
        let empty = Hypergraph::new(3, 6, vec![]).unwrap();
        assert_eq!(
            empty.degree_ratio_profile().unwrap(),
            vec![Ratio::from_integer(0u128); 3]
        );
    }

    #[test]
    fn dirac_checks() {
        let alpha = alpha13();
        let p1 = DiracParams::new(1, 0.1).unwrap();
        assert!(k6().is_dirac(&p1, &alpha).unwrap());
        let empty = Hypergraph::new(3, 6, vec![]).unwrap();
        assert!(!empty.is_dirac(&p1, &alpha).unwrap());
        let k7 = Hypergraph::complete(7, 3).unwrap();
        assert!(!k7.is_dirac(&p1, &alpha).unwrap());
        // (1, 3) is not a built-in value.
        let err = k6().is_dirac(&p1, &AlphaTable::default()).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("(1, 3)")));
    }

    #[test]
    fn alpha_table_rules() {
        let t = AlphaTable::default();
        assert_eq!(t.get(2, 3).unwrap(), Ratio::new(1, 2));
        assert_eq!(t.get(3, 8).unwrap(), Ratio::new(1, 2));
        assert!(t.get(2, 8).is_err());
        assert!(t.clone().with_entry(1, 3, Ratio::new(2, 5)).is_err());
        // α_1(4) below α_2(4) = 1/2 is impossible since values are ≥ 1/2;
        // an override of α_3(4) above α_2(4) breaks the ordering.
        assert!(t.clone().with_entry(3, 4, Ratio::new(3, 5)).is_err());
        let parsed = AlphaTable::parse("# known\n1 3 5/9\n1 4 0.6\n").unwrap();
        assert_eq!(parsed.get(1, 3).unwrap(), Ratio::new(5, 9));
        assert_eq!(parsed.get(1, 4).unwrap(), Ratio::new(3, 5));
        assert!(matches!(
            AlphaTable::parse("1 3"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn complete_generators() {
        assert_eq!(Hypergraph::complete(4, 2).unwrap().num_edges(), 6);
        assert_eq!(Hypergraph::complete(6, 3).unwrap().num_edges(), 20);
        assert_eq!(Hypergraph::complete(3, 3).unwrap().num_edges(), 1);
    }

    #[test]
    fn random_dirac_generation() {
        let alpha = alpha13();
        let p = DiracParams::new(1, 0.05).unwrap();
        let full = gen_random_dirac(12, 3, &p, 1.0, 1, &alpha, 10).unwrap();
        assert_eq!(full, Hypergraph::complete(12, 3).unwrap());

        let a = gen_random_dirac(12, 3, &p, 0.9, 7, &alpha, 100).unwrap();
        let b = gen_random_dirac(12, 3, &p, 0.9, 7, &alpha, 100).unwrap();
        assert_eq!(a.to_khg_string(), b.to_khg_string());
        assert!(a.is_dirac(&p, &alpha).unwrap());
        assert!(a.num_edges() < 220);

        let hard = DiracParams::new(2, 0.4).unwrap();
        let err = gen_random_dirac(12, 3, &hard, 0.55, 3, &alpha, 50).unwrap_err();
        match err {
            Error::GenerationFailure {
                achieved, required, ..
            } => {
                assert!((achieved as f64) < required);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(Hypergraph::new(3, 6, vec![vec![0, 1]]).is_err());
        assert!(Hypergraph::new(3, 6, vec![vec![0, 1, 1]]).is_err());
        assert!(Hypergraph::new(3, 6, vec![vec![0, 1, 6]]).is_err());
        assert!(Hypergraph::new(3, 6, vec![vec![0, 1, 2], vec![2, 1, 0]]).is_err());
        let g = Hypergraph::new(3, 6, vec![vec![2, 0, 1]]).unwrap();
        assert_eq!(g.edge(0), &[0, 1, 2]);
        assert_eq!(g.edge_id(&[0, 1, 2]), Some(0));
        assert!(g.incidence_consistent());
    }
}
