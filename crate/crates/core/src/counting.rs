//! Exact perfect-matching counts, uniform sampling and exact marginals.
//!
//! Counting is a memoized recursion over the set `R` of still-unmatched
//! vertices: `Φ(R) = Σ Φ(R \ e)` over the edges `e ⊆ R` containing the lowest
//! vertex of `R`, with `Φ(∅) = 1`. Fixing the lowest vertex means every
//! matching is counted once regardless of edge order.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combin::{factorial_big, ln_big, ln_factorial, random_below, ratio_to_f64};
use crate::entropy::{max_entropy_fpm, EdgeWeights, FEAS_TOL};
use crate::error::{invalid, Error, Result};
use crate::hypergraph::{AlphaTable, DiracParams, Hypergraph};
use crate::rng::seeded;

pub const DEFAULT_VERTEX_CAP: usize = 24;
pub const MAX_VERTEX_CAP: usize = 64;
/// Largest `n` that uses a dense memo table indexed by vertex mask.
const DENSE_MAX_N: usize = 20;
const UNKNOWN: u128 = u128::MAX;

fn big_ser<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn big_de<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BigUint, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// `Φ(G)` with the digest of the graph it counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingCount {
    #[serde(serialize_with = "big_ser", deserialize_with = "big_de")]
    pub value: BigUint,
    pub digest: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

enum SmallMemo {
    Dense(Vec<u128>),
    Sparse(HashMap<u64, u128>),
}

/// Memoized counter for one graph; reusable across queries on any residual
/// vertex set.
pub struct PmCounter {
    n: usize,
    k: usize,
    /// Edges as `(mask, id)` grouped by their lowest vertex.
    by_min: Vec<Vec<(u64, usize)>>,
    small: SmallMemo,
    big: Option<HashMap<u64, BigUint>>,
    max_states: usize,
    states: usize,
}

impl PmCounter {
    pub fn new(g: &Hypergraph) -> Result<Self> {
        Self::with_cap(g, DEFAULT_VERTEX_CAP)
    }

    pub fn with_cap(g: &Hypergraph, cap: usize) -> Result<Self> {
        if cap > MAX_VERTEX_CAP {
            return invalid(format!("vertex cap {cap} exceeds {MAX_VERTEX_CAP}"));
        }
        if g.n() > cap {
            return Err(Error::Resource(format!(
                "exact counting supports n <= {cap}, got n = {}",
                g.n()
            )));
        }
        let mut by_min = vec![Vec::new(); g.n()];
        for (id, e) in g.edges().iter().enumerate() {
            by_min[e[0]].push((mask_of(e), id));
        }
        let small = if g.n() <= DENSE_MAX_N {
            SmallMemo::Dense(vec![UNKNOWN; 1usize << g.n()])
        } else {
            SmallMemo::Sparse(HashMap::new())
        };
        Ok(Self {
            n: g.n(),
            k: g.k(),
            by_min,
            small,
            big: None,
            max_states: 1 << 25,
            states: 0,
        })
    }

    pub fn full_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    /// Number of perfect matchings of the subgraph induced on `rest`.
    pub fn count_mask(&mut self, rest: u64) -> Result<BigUint> {
        if (rest.count_ones() as usize) % self.k != 0 {
            return Ok(BigUint::zero());
        }
        if self.big.is_none() {
            match self.count_small(rest)? {
                Some(v) => return Ok(BigUint::from(v)),
                None => self.big = Some(HashMap::new()),
            }
        }
        self.count_big(rest)
    }

    pub fn count_all(&mut self) -> Result<BigUint> {
        self.count_mask(self.full_mask())
    }

    fn small_get(&self, rest: u64) -> u128 {
        match &self.small {
            SmallMemo::Dense(t) => t[rest as usize],
            SmallMemo::Sparse(m) => m.get(&rest).copied().unwrap_or(UNKNOWN),
        }
    }

    fn small_put(&mut self, rest: u64, v: u128) -> Result<()> {
        self.states += 1;
        if self.states > self.max_states {
            return Err(Error::Resource(format!(
                "exact counting exceeded {} memo states",
                self.max_states
            )));
        }
        match &mut self.small {
            SmallMemo::Dense(t) => t[rest as usize] = v,
            SmallMemo::Sparse(m) => {
                m.insert(rest, v);
            }
        }
        Ok(())
    }

    /// `None` on `u128` overflow.
    fn count_small(&mut self, rest: u64) -> Result<Option<u128>> {
        if rest == 0 {
            return Ok(Some(1));
        }
        let cached = self.small_get(rest);
        if cached != UNKNOWN {
            return Ok(Some(cached));
        }
        let low = rest.trailing_zeros() as usize;
        let mut total: u128 = 0;
        for i in 0..self.by_min[low].len() {
            let (m, _) = self.by_min[low][i];
            if m & rest == m {
                let Some(c) = self.count_small(rest & !m)? else {
                    return Ok(None);
                };
                match total.checked_add(c) {
                    Some(t) if t != UNKNOWN => total = t,
                    _ => return Ok(None),
                }
            }
        }
        self.small_put(rest, total)?;
        Ok(Some(total))
    }

    fn count_big(&mut self, rest: u64) -> Result<BigUint> {
        if rest == 0 {
            return Ok(BigUint::one());
        }
        if let Some(v) = self.big.as_ref().and_then(|m| m.get(&rest)) {
            return Ok(v.clone());
        }
        let low = rest.trailing_zeros() as usize;
        let mut total = BigUint::zero();
        for i in 0..self.by_min[low].len() {
            let (m, _) = self.by_min[low][i];
            if m & rest == m {
                total += self.count_big(rest & !m)?;
            }
        }
        self.states += 1;
        if self.states > self.max_states {
            return Err(Error::Resource(format!(
                "exact counting exceeded {} memo states",
                self.max_states
            )));
        }
        self.big
            .get_or_insert_with(HashMap::new)
            .insert(rest, total.clone());
        Ok(total)
    }

    /// Feasible edges at the lowest vertex of `rest`, with their completion
    /// counts.
    fn children(&mut self, rest: u64) -> Result<Vec<(u64, usize, BigUint)>> {
        let low = rest.trailing_zeros() as usize;
        let cands: Vec<(u64, usize)> = self.by_min[low]
            .iter()
            .copied()
            .filter(|&(m, _)| m & rest == m)
            .collect();
        cands
            .into_iter()
            .map(|(m, id)| Ok((m, id, self.count_mask(rest & !m)?)))
            .collect()
    }

    /// Uniformly random perfect matching of the subgraph induced on `rest`,
    /// as edge ids in the order chosen.
    ///
    /// One draw per step: an integer below the current count, consumed
    /// against the children in edge-id order.
    pub fn sample_mask<R: Rng + ?Sized>(&mut self, rest: u64, rng: &mut R) -> Result<Vec<usize>> {
        let total = self.count_mask(rest)?;
        if total.is_zero() {
            return Err(Error::Sampling(
                "the residual graph has no perfect matching".into(),
            ));
        }
        let mut out = Vec::new();
        let mut cur = rest;
        let mut cur_count = total;
        while cur != 0 {
            let kids = self.children(cur)?;
            let sum: BigUint = kids.iter().map(|(_, _, c)| c).sum();
            if sum != cur_count {
                return Err(Error::Sampling(format!(
                    "conditional counts do not telescope at state {cur:#x}"
                )));
            }
            let mut r = match cur_count.to_u128() {
                Some(b) => BigUint::from(rng.gen_range(0..b)),
                None => random_below(rng, &cur_count),
            };
            let mut chosen = None;
            for (m, id, c) in kids {
                if r < c {
                    chosen = Some((m, id, c));
                    break;
                }
                r -= c;
            }
            let (m, id, c) = chosen.expect("draw below the total");
            out.push(id);
            cur &= !m;
            cur_count = c;
        }
        if !cur_count.is_one() {
            return Err(Error::Sampling(
                "telescoping counts did not end at 1".into(),
            ));
        }
        Ok(out)
    }

    /// First perfect matching of `rest` in edge-id order, if any.
    pub fn first_completion(&mut self, rest: u64) -> Result<Option<Vec<usize>>> {
        if self.count_mask(rest)?.is_zero() {
            return Ok(None);
        }
        let mut out = Vec::new();
        let mut cur = rest;
        while cur != 0 {
            let kids = self.children(cur)?;
            let (m, id, _) = kids
                .into_iter()
                .find(|(_, _, c)| !c.is_zero())
                .expect("positive count");
            out.push(id);
            cur &= !m;
        }
        Ok(Some(out))
    }
}

pub fn mask_of(vertices: &[usize]) -> u64 {
    vertices.iter().fold(0u64, |m, &v| m | (1u64 << v))
}

pub fn count_pm(g: &Hypergraph) -> Result<MatchingCount> {
    count_pm_with_cap(g, DEFAULT_VERTEX_CAP)
}

pub fn count_pm_with_cap(g: &Hypergraph, cap: usize) -> Result<MatchingCount> {
    if g.n() % g.k() != 0 {
        return Ok(MatchingCount {
            value: BigUint::zero(),
            digest: g.digest(),
            note: Some(format!("k = {} does not divide n = {}", g.k(), g.n())),
        });
    }
    let mut counter = PmCounter::with_cap(g, cap)?;
    Ok(MatchingCount {
        value: counter.count_all()?,
        digest: g.digest(),
        note: None,
    })
}

/// `Φ(K_n^(k)) = n! / ((n/k)! (k!)^{n/k})`.
pub fn phi_complete(n: usize, k: usize) -> Result<BigUint> {
    if k == 0 || n % k != 0 {
        return invalid(format!("k = {k} must divide n = {n}"));
    }
    let m = n / k;
    let denom = factorial_big(m as u64) * factorial_big(k as u64).pow(m as u32);
    Ok(factorial_big(n as u64) / denom)
}

/// `ln Φ(K_n^(k))` in floating point.
pub fn ln_phi_complete(n: usize, k: usize) -> f64 {
    let m = (n / k) as u64;
    ln_factorial(n as u64) - ln_factorial(m) - m as f64 * ln_factorial(k as u64)
}

pub fn sample_uniform_pm(g: &Hypergraph, seed: u64) -> Result<Vec<usize>> {
    let mut counter = PmCounter::new(g)?;
    let mut rng = seeded(seed);
    let full = counter.full_mask();
    let mut pm = counter.sample_mask(full, &mut rng)?;
    pm.sort_unstable();
    Ok(pm)
}

/// Exact edge marginals of the uniform random perfect matching.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub total: BigUint,
    /// `Φ(G − V(e))` per edge.
    pub counts: Vec<BigUint>,
    pub weights: EdgeWeights,
    /// Every vertex satisfies `Σ_{e∋v} Φ(G − V(e)) = Φ(G)` in integers.
    pub exact_sums: bool,
}

pub fn pm_marginals(g: &Hypergraph) -> Result<Marginals> {
    let mut counter = PmCounter::new(g)?;
    let full = counter.full_mask();
    let total = counter.count_all()?;
    if total.is_zero() {
        return Err(Error::Infeasible("graph has no perfect matching".into()));
    }
    let counts: Vec<BigUint> = g
        .edges()
        .iter()
        .map(|e| counter.count_mask(full & !mask_of(e)))
        .collect::<Result<_>>()?;
    let exact_sums =
        (0..g.n()).all(|v| g.incident(v).iter().map(|&id| &counts[id]).sum::<BigUint>() == total);
    let w = counts.iter().map(|c| ratio_to_f64(c, &total)).collect();
    let weights = EdgeWeights::verified(g, w, FEAS_TOL)?;
    Ok(Marginals {
        total,
        counts,
        weights,
        exact_sums,
    })
}

/// Finite distribution over outcomes `0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return invalid("probabilities must be nonnegative");
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return invalid(format!("probabilities sum to {s}"));
        }
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn entropy(&self) -> f64 {
        self.probs.iter().map(|&p| crate::entropy::plogp(p)).sum()
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Joint law of `(X, Y)` as a row-per-`x` table.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    table: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let flat: Vec<f64> = table.iter().flatten().copied().collect();
        DiscreteDistribution::new(flat)?;
        if table.windows(2).any(|w| w[0].len() != w[1].len()) {
            return invalid("joint table rows must have equal length");
        }
        Ok(Self { table })
    }

    pub fn joint_entropy(&self) -> f64 {
        self.table
            .iter()
            .flatten()
            .map(|&p| crate::entropy::plogp(p))
            .sum()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.table.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let cols = self.table.first().map_or(0, Vec::len);
        (0..cols)
            .map(|j| self.table.iter().map(|row| row[j]).sum())
            .collect()
    }

    pub fn entropy_x(&self) -> f64 {
        self.marginal_x()
            .iter()
            .map(|&p| crate::entropy::plogp(p))
            .sum()
    }

    pub fn entropy_y(&self) -> f64 {
        self.marginal_y()
            .iter()
            .map(|&p| crate::entropy::plogp(p))
            .sum()
    }

    /// `H(Y | X) = Σ_x p(x) H(Y | X = x)`.
    pub fn conditional_y_given_x(&self) -> f64 {
        self.table
            .iter()
            .map(|row| {
                let px: f64 = row.iter().sum();
                if px <= 0.0 {
                    0.0
                } else {
                    px * row
                        .iter()
                        .map(|&p| crate::entropy::plogp(p / px))
                        .sum::<f64>()
                }
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyIdentityReport {
    pub ln_phi: f64,
    pub h_marginals: f64,
    pub k_h_marginals: f64,
    pub h_solver: f64,
    /// `k·h(x) ≥ ln Φ(G) − 1e−9`.
    pub marginal_bound: bool,
    /// `h(G) ≥ h(x) − 1e−6`.
    pub solver_dominates: bool,
    pub exact_vertex_sums: bool,
}

pub fn entropy_identities_check(g: &Hypergraph) -> Result<EntropyIdentityReport> {
    let marg = pm_marginals(g)?;
    let (_, rep) = max_entropy_fpm(g, FEAS_TOL, 200_000)?;
    let ln_phi = ln_big(&marg.total);
    let h = marg.weights.entropy();
    let kh = g.k() as f64 * h;
    Ok(EntropyIdentityReport {
        ln_phi,
        h_marginals: h,
        k_h_marginals: kh,
        h_solver: rep.entropy,
        marginal_bound: kh >= ln_phi - 1e-9,
        solver_dominates: rep.entropy >= h - 1e-6,
        exact_vertex_sums: marg.exact_sums,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SCountCheck {
    /// `ln((n/k)!) + ln Φ(G)`.
    pub ln_s: f64,
    /// `h(G) + (n/k) ln(n/k) − n`.
    pub target: f64,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub gamma: f64,
    #[serde(serialize_with = "big_ser", deserialize_with = "big_de")]
    pub phi: BigUint,
    pub ln_phi: f64,
    pub h_solver: f64,
    pub solver_converged: bool,
    /// `ln Φ − (h − (1 − 1/k) n)`.
    pub residual: f64,
    pub residual_per_n: f64,
    pub s_count_check: SCountCheck,
    pub dirac: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

pub fn verify_count_vs_entropy(
    g: &Hypergraph,
    params: &DiracParams,
    alpha: &AlphaTable,
) -> Result<CountReport> {
    let dirac = g.is_dirac(params, alpha)?;
    let count = count_pm(g)?;
    let ln_phi = ln_big(&count.value);
    let (h, converged) = match max_entropy_fpm(g, FEAS_TOL, 200_000) {
        Ok((_, rep)) => (rep.entropy, rep.converged),
        Err(Error::Infeasible(_)) => (f64::NEG_INFINITY, false),
        Err(e) => return Err(e),
    };
    let n = g.n() as f64;
    let k = g.k() as f64;
    let residual = ln_phi - (h - (1.0 - 1.0 / k) * n);
    let m = g.n() / g.k();
    let ln_s = ln_factorial(m as u64) + ln_phi;
    let target = h + (m as f64) * (m as f64).ln() - n;
    Ok(CountReport {
        n: g.n(),
        k: g.k(),
        d: params.d,
        gamma: params.gamma,
        phi: count.value,
        ln_phi,
        h_solver: h,
        solver_converged: converged,
        residual,
        residual_per_n: residual / n,
        s_count_check: SCountCheck {
            ln_s,
            target,
            difference: ln_s - target,
        },
        dirac,
        warning: (!dirac).then(|| format!("graph is not ({}, {})-Dirac", params.d, params.gamma)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pm(n: usize, k: usize) -> Hypergraph {
        Hypergraph::new(
            k,
            n,
            (0..n / k).map(|i| (i * k..(i + 1) * k).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn small_counts() {
        assert_eq!(
            count_pm(&Hypergraph::complete(4, 2).unwrap())
                .unwrap()
                .value,
            3u32.into()
        );
        assert_eq!(
            count_pm(&Hypergraph::complete(6, 3).unwrap())
                .unwrap()
                .value,
            10u32.into()
        );
        assert_eq!(count_pm(&single_pm(9, 3)).unwrap().value, 1u32.into());
        let odd = count_pm(&Hypergraph::complete(7, 3).unwrap()).unwrap();
        assert!(odd.value.is_zero() && odd.note.is_some());
        let big = Hypergraph::new(2, 26, vec![vec![0, 1]]).unwrap();
        assert!(matches!(count_pm(&big), Err(Error::Resource(_))));
    }

    #[test]
    fn closed_form_matches_dp() {
        assert_eq!(phi_complete(6, 3).unwrap(), 10u32.into());
        assert_eq!(phi_complete(4, 2).unwrap(), 3u32.into());
        assert_eq!(phi_complete(5, 5).unwrap(), 1u32.into());
        assert!(phi_complete(7, 3).is_err());
        for (n, k) in [(4, 2), (6, 2), (8, 2), (6, 3), (9, 3), (8, 4)] {
            let g = Hypergraph::complete(n, k).unwrap();
            assert_eq!(
                count_pm(&g).unwrap().value,
                phi_complete(n, k).unwrap(),
                "({n},{k})"
            );
            let ln = ln_phi_complete(n, k);
            assert!((ln - ln_big(&phi_complete(n, k).unwrap())).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_memo_above_dense_limit() {
        let g = Hypergraph::complete(22, 2).unwrap();
        assert_eq!(count_pm(&g).unwrap().value, phi_complete(22, 2).unwrap());
    }

    #[test]
    fn sampling_and_completion() {
        let g = single_pm(6, 3);
        assert_eq!(sample_uniform_pm(&g, 1).unwrap(), vec![0, 1]);
        let k6 = Hypergraph::complete(6, 3).unwrap();
        let a = sample_uniform_pm(&k6, 5).unwrap();
        assert_eq!(a, sample_uniform_pm(&k6, 5).unwrap());
        let mut cover: Vec<usize> = a.iter().flat_map(|&id| k6.edge(id).to_vec()).collect();
        cover.sort_unstable();
        assert_eq!(cover, (0..6).collect::<Vec<_>>());
        let empty = Hypergraph::new(3, 6, vec![vec![0, 1, 2]]).unwrap();
        assert!(matches!(
            sample_uniform_pm(&empty, 0),
            Err(Error::Sampling(_))
        ));
        let mut c = PmCounter::new(&k6).unwrap();
        assert_eq!(c.first_completion(c.full_mask()).unwrap().unwrap().len(), 2);
    }

    #[test]
    fn marginals_of_small_graphs() {
        let k6 = Hypergraph::complete(6, 3).unwrap();
        let m = pm_marginals(&k6).unwrap();
        assert!(m.exact_sums);
        assert!(m.weights.weights().iter().all(|&w| (w - 0.1).abs() < 1e-15));
        let pm = pm_marginals(&single_pm(6, 3)).unwrap();
        assert_eq!(pm.weights.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn entropy_identities() {
        let rep = entropy_identities_check(&Hypergraph::complete(6, 3).unwrap()).unwrap();
        assert!((rep.k_h_marginals - 6.0 * 10f64.ln()).abs() < 1e-9);
        assert!((rep.ln_phi - 10f64.ln()).abs() < 1e-12);
        assert!(rep.marginal_bound && rep.solver_dominates);
        let single = entropy_identities_check(&single_pm(6, 3)).unwrap();
        assert_eq!(single.k_h_marginals, 0.0);
        assert_eq!(single.ln_phi, 0.0);

        let u = DiscreteDistribution::uniform(7);
        assert!((u.entropy() - 7f64.ln()).abs() < 1e-12);
        let j = JointDistribution::new(vec![vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        assert!((j.joint_entropy() - (j.entropy_x() + j.conditional_y_given_x())).abs() < 1e-12);
        assert!(j.conditional_y_given_x() <= j.entropy_y() + 1e-12);
        assert!(DiscreteDistribution::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn count_versus_entropy_reports() {
        let alpha = AlphaTable::default();
        let p = DiracParams::new(2, 0.1).unwrap();
        let rep =
            verify_count_vs_entropy(&Hypergraph::complete(6, 3).unwrap(), &p, &alpha).unwrap();
        assert!((rep.ln_phi - 10f64.ln()).abs() < 1e-12);
        assert!((rep.residual - (10f64.ln() - (2.0 * 10f64.ln() - 4.0))).abs() < 1e-9);
        assert!((rep.residual_per_n - 0.283).abs() < 1e-3);
        assert!(rep.warning.is_none());
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["phi"], "10");
        let single = verify_count_vs_entropy(&single_pm(6, 3), &p, &alpha).unwrap();
        assert!(single.warning.is_some());
    }
}
