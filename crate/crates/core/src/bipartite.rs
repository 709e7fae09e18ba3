//! The auxiliary bipartite lift of a `k`-graph and the entropy lower bound it
//! certifies.
//!
//! Side `A` holds every `d`-set of vertices, each duplicated `C(n, k−d)`
//! times; side `B` holds every `(k−d)`-set, each duplicated `C(n, d)` times.
//! A copy of `U` is joined to a copy of `W` whenever `U ∪ W` is an edge. The
//! lift is stored in quotient form: one variable per distinct pair `(U, W)`,
//! carrying the weight shared by all of its expanded copies.

use std::collections::HashMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::combin::{binomial_f64, binomial_u128, ln_big, ln_factorial};
use crate::counting::{count_pm, ln_phi_complete, DEFAULT_VERTEX_CAP};
use crate::entropy::{
    max_entropy_fpm, plogp, scale_to_feasible, EdgeWeights, ScalingSystem, SolverOptions, FEAS_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::hypergraph::{DiracParams, Hypergraph};

/// Largest number of distinct subsets allowed on either side.
pub const SUBSET_CAP: u128 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientEdge {
    /// Index into the `A`-side subsets.
    pub a: usize,
    /// Index into the `B`-side subsets.
    pub b: usize,
    pub source: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    A,
    B,
}

/// Minimum degree of the expanded lift on each side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftDegrees {
    /// `C(n, d) · δ_d(G)`.
    pub a_side: u128,
    /// `C(n, k−d) · δ_{k−d}(G)`.
    pub b_side: u128,
    pub min: u128,
    pub attained_by: Side,
    pub delta_d: u64,
    pub delta_k_minus_d: u64,
}

#[derive(Clone, Debug)]
pub struct BipartiteLift {
    digest: String,
    n: usize,
    k: usize,
    d: usize,
    a_sets: Vec<Vec<usize>>,
    b_sets: Vec<Vec<usize>>,
    m_a: u128,
    m_b: u128,
    splits: usize,
    /// Edge `e` owns `edges[e·splits .. (e+1)·splits]`.
    edges: Vec<QuotientEdge>,
    a_degree: Vec<u64>,
    b_degree: Vec<u64>,
}

fn check_range(k: usize, d: usize) -> Result<()> {
    if 2 * d < k || d >= k {
        return invalid(format!(
            "the lift needs k/2 <= d <= k-1, got d = {d} with k = {k}"
        ));
    }
    Ok(())
}

fn subset_index(sets: &[Vec<usize>]) -> HashMap<&[usize], usize> {
    sets.iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect()
}

pub fn lift(g: &Hypergraph, d: usize) -> Result<BipartiteLift> {
    let (n, k) = (g.n(), g.k());
    check_range(k, d)?;
    let m_b = binomial_u128(n as u64, d as u64).unwrap_or(u128::MAX);
    let m_a = binomial_u128(n as u64, (k - d) as u64).unwrap_or(u128::MAX);
    if m_a.max(m_b) > SUBSET_CAP {
        return Err(Error::Resource(format!(
            "lift needs C({n},{d}) = {m_b} and C({n},{}) = {m_a} subsets; cap is {SUBSET_CAP}",
            k - d
        )));
    }
    let a_sets: Vec<Vec<usize>> = (0..n).combinations(d).collect();
    let b_sets: Vec<Vec<usize>> = (0..n).combinations(k - d).collect();
    let (a_idx, b_idx) = (subset_index(&a_sets), subset_index(&b_sets));
    let splits = binomial_u128(k as u64, d as u64).expect("small binomial") as usize;
    let mut edges = Vec::with_capacity(g.num_edges() * splits);
    let mut a_degree = vec![0u64; a_sets.len()];
    let mut b_degree = vec![0u64; b_sets.len()];
    for (id, e) in g.edges().iter().enumerate() {
        for pos in (0..k).combinations(d) {
            let mut u = Vec::with_capacity(d);
            let mut w = Vec::with_capacity(k - d);
            let mut it = pos.iter().peekable();
            for (j, &v) in e.iter().enumerate() {
                if it.peek() == Some(&&j) {
                    it.next();
                    u.push(v);
                } else {
                    w.push(v);
                }
            }
            let (a, b) = (a_idx[u.as_slice()], b_idx[w.as_slice()]);
            a_degree[a] += 1;
            b_degree[b] += 1;
            edges.push(QuotientEdge { a, b, source: id });
        }
    }
    Ok(BipartiteLift {
        digest: g.digest(),
        n,
        k,
        d,
        a_sets,
        b_sets,
        m_a,
        m_b,
        splits,
        edges,
        a_degree,
        b_degree,
    })
}

impl BipartiteLift {
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn a_sets(&self) -> &[Vec<usize>] {
        &self.a_sets
    }

    pub fn b_sets(&self) -> &[Vec<usize>] {
        &self.b_sets
    }

    /// Copies of each `A`-side subset, `C(n, k−d)`.
    pub fn m_a(&self) -> u128 {
        self.m_a
    }

    /// Copies of each `B`-side subset, `C(n, d)`.
    pub fn m_b(&self) -> u128 {
        self.m_b
    }

    /// `ñ = |Ã| = |B̃|`.
    pub fn n_tilde(&self) -> u128 {
        self.m_a * self.m_b
    }

    /// `L = (k/n)·ñ`.
    pub fn l(&self) -> f64 {
        self.k as f64 / self.n as f64 * self.n_tilde() as f64
    }

    /// Expanded copies per source edge, `C(k, d)·ñ`.
    pub fn q(&self) -> u128 {
        self.splits as u128 * self.n_tilde()
    }

    /// Quotient edges per source edge, `C(k, d)`.
    pub fn splits(&self) -> usize {
        self.splits
    }

    pub fn edges(&self) -> &[QuotientEdge] {
        &self.edges
    }

    pub fn source_edges(&self, e: usize) -> &[QuotientEdge] {
        &self.edges[e * self.splits..(e + 1) * self.splits]
    }

    /// Number of expanded edges of the lift.
    pub fn expanded_edges(&self) -> u128 {
        self.edges.len() as u128 * self.n_tilde()
    }

    pub fn degrees(&self) -> LiftDegrees {
        let delta_d = self.a_degree.iter().copied().min().unwrap_or(0);
        let delta_kd = self.b_degree.iter().copied().min().unwrap_or(0);
        let a_side = self.m_b * delta_d as u128;
        let b_side = self.m_a * delta_kd as u128;
        LiftDegrees {
            a_side,
            b_side,
            min: a_side.min(b_side),
            attained_by: if a_side <= b_side { Side::A } else { Side::B },
            delta_d,
            delta_k_minus_d: delta_kd,
        }
    }

    /// One constraint per distinct subset: an `A`-side copy sums
    /// `m_B·y` over its pairs, a `B`-side copy sums `m_A·y`.
    pub fn system(&self) -> ScalingSystem {
        let mut constraints = vec![Vec::new(); self.a_sets.len() + self.b_sets.len()];
        let (ca, cb) = (self.m_b as f64, self.m_a as f64);
        for (q, e) in self.edges.iter().enumerate() {
            constraints[e.a].push((q, ca));
            constraints[self.a_sets.len() + e.b].push((q, cb));
        }
        ScalingSystem {
            num_vars: self.edges.len(),
            constraints,
        }
    }

    fn check_source(&self, g: &Hypergraph) -> Result<()> {
        if g.digest() != self.digest {
            return invalid("lift was built from a different graph");
        }
        Ok(())
    }
}

/// Per-copy weights on the quotient edges of a lift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftWeights {
    pub y: Vec<f64>,
    /// Entropy of the expanded weighting, `ñ·Σ y ln(1/y)`.
    pub entropy: f64,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    /// `δ(G̃) ≥ ñ/2`.
    pub hypothesis: bool,
    pub n_tilde: f64,
    pub delta: f64,
    /// `ñ·ln δ(G̃)`.
    pub target: f64,
    pub entropy: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftSolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub max_residual: f64,
    pub degrees: LiftDegrees,
    pub lemma: LemmaCheck,
}

/// Absolute slack on the lemma inequality, scaled to the expanded size.
fn lemma_slack(n_tilde: f64) -> f64 {
    1e-6 * n_tilde.max(1.0)
}

pub fn bipartite_max_entropy(lift: &BipartiteLift) -> Result<(LiftWeights, LiftSolveReport)> {
    bipartite_max_entropy_with(lift, &lift_solver_options(), true)
}

pub fn lift_solver_options() -> SolverOptions {
    SolverOptions {
        tol: 1e-11,
        max_iter: 200_000,
        ..SolverOptions::default()
    }
}

/// Max-entropy solve of the expanded lift, done per distinct subset.
///
/// With `require_hypothesis` a lift violating `δ(G̃) ≥ ñ/2` is rejected;
/// without it the solve still runs and the report records the failure. A
/// converged solve below `ñ·ln δ(G̃)` under the hypothesis is a certificate
/// error.
pub fn bipartite_max_entropy_with(
    lift: &BipartiteLift,
    opts: &SolverOptions,
    require_hypothesis: bool,
) -> Result<(LiftWeights, LiftSolveReport)> {
    let degrees = lift.degrees();
    let n_tilde = lift.n_tilde();
    let hypothesis = 2 * degrees.min >= n_tilde;
    if require_hypothesis && !hypothesis {
        return invalid(format!(
            "lift minimum degree {} is below n~/2 = {}",
            degrees.min,
            n_tilde as f64 / 2.0
        ));
    }
    if degrees.min == 0 {
        return Err(Error::Infeasible("some subset lies in no edge".into()));
    }
    let sys = lift.system();
    let y0 = 1.0 / degrees.min as f64;
    let phi0 = vec![(1.0 + y0.ln()) / 2.0; sys.constraints.len()];
    let base = vec![(-1.0f64).exp(); sys.num_vars];
    let out = scale_to_feasible(&sys, &base, &phi0, opts)?;
    let nt = n_tilde as f64;
    let entropy = nt * out.values.iter().map(|&y| plogp(y)).sum::<f64>();
    let delta = degrees.min as f64;
    let target = nt * delta.ln();
    let lemma = LemmaCheck {
        hypothesis,
        n_tilde: nt,
        delta,
        target,
        entropy,
        holds: entropy >= target - lemma_slack(nt),
    };
    if out.converged && hypothesis && !lemma.holds {
        return Err(Error::Certificate(format!(
            "lift entropy {entropy} is below n~ ln delta = {target}"
        )));
    }
    let weights = LiftWeights {
        y: out.values,
        entropy,
        max_residual: out.max_residual,
    };
    let report = LiftSolveReport {
        iterations: out.iterations,
        converged: out.converged,
        max_residual: out.max_residual,
        degrees,
        lemma,
    };
    Ok((weights, report))
}

/// `x[e] = Σ_{ẽ∼e} x̃[ẽ] / L = (n/k)·Σ_{splits of e} y`.
pub fn pull_back(
    g: &Hypergraph,
    lift: &BipartiteLift,
    x: &LiftWeights,
    tol: f64,
) -> Result<EdgeWeights> {
    lift.check_source(g)?;
    if x.y.len() != lift.edges.len() {
        return invalid(format!(
            "{} weights for {} quotient edges",
            x.y.len(),
            lift.edges.len()
        ));
    }
    if x.y.iter().any(|&y| !(y >= 0.0) || !y.is_finite()) {
        return invalid("lift weights must be nonnegative and finite");
    }
    let residual = lift.system().max_residual(&x.y);
    if residual > tol {
        return invalid(format!(
            "lift weights are not a fractional perfect matching (residual {residual:.3e})"
        ));
    }
    let scale = lift.n as f64 / lift.k as f64;
    let w: Vec<f64> = (0..g.num_edges())
        .map(|e| {
            let s: f64 = (e * lift.splits..(e + 1) * lift.splits)
                .map(|q| x.y[q])
                .sum();
            (scale * s).min(1.0)
        })
        .collect();
    let pulled_tol = (tol * scale * lift.k as f64).max(FEAS_TOL);
    EdgeWeights::verified(g, w, pulled_tol)
}

/// `(n/k)·ln((k/n)·C(n,d)/C(k,d)·δ_d(G))`.
pub fn entropy_lower_bound(g: &Hypergraph, d: usize) -> Result<f64> {
    check_range(g.k(), d)?;
    Ok(bound_for(g.n(), g.k(), d, g.min_d_degree(d)? as f64))
}

fn bound_for(n: usize, k: usize, d: usize, delta_d: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    nf / kf * (kf / nf * binomial_f64(n, d) / binomial_f64(k, d) * delta_d).ln()
}

/// Each line of the final entropy chain, evaluated on a pulled-back matching.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundChain {
    /// `h(x)`.
    pub h_pullback: f64,
    /// The exact split of `h(x)` through `ln(L/Q)`.
    pub decomposed: f64,
    /// After Jensen: `(ñ/L)·ln((k/n)/C(k,d)) + h(x̃)/L`.
    pub jensen: f64,
    /// After the lemma: `(ñ/L)·ln((k/n)/C(k,d)) + (ñ/L)·ln δ(G̃)`.
    pub lemma: f64,
    /// The closed-form bound.
    pub bound: f64,
    pub jensen_ok: bool,
    pub lemma_ok: bool,
    /// `δ(G̃) = C(n,d)·δ_d(G)`, so the last two lines agree.
    pub translation_ok: bool,
    pub holds: bool,
}

const CHAIN_TOL: f64 = 1e-6;

pub fn bound_chain(lift: &BipartiteLift, x: &LiftWeights, pulled: &EdgeWeights) -> BoundChain {
    let nt = lift.n_tilde() as f64;
    let l = lift.l();
    let q = lift.q() as f64;
    let kn = lift.k as f64 / lift.n as f64;
    let headroom = (kn / binomial_f64(lift.k, lift.d)).ln();
    let degrees = lift.degrees();
    let sums: Vec<f64> = (0..lift.edges.len() / lift.splits)
        .map(|e| {
            nt * (e * lift.splits..(e + 1) * lift.splits)
                .map(|i| x.y[i])
                .sum::<f64>()
        })
        .collect();
    let total: f64 = sums.iter().sum();
    let decomposed =
        (l / q).ln() / l * total + q / l * sums.iter().map(|&s| plogp(s / q)).sum::<f64>();
    let jensen = headroom * nt / l + x.entropy / l;
    let lemma = headroom * nt / l + nt / l * (degrees.min as f64).ln();
    let bound = bound_for(lift.n, lift.k, lift.d, degrees.delta_d as f64);
    let h = pulled.entropy();
    let jensen_ok = decomposed >= jensen - CHAIN_TOL;
    let lemma_ok = x.entropy >= nt * (degrees.min as f64).ln() - lemma_slack(nt);
    let translation_ok = degrees.attained_by == Side::A;
    BoundChain {
        h_pullback: h,
        decomposed,
        jensen,
        lemma,
        bound,
        jensen_ok,
        lemma_ok,
        translation_ok,
        holds: h >= bound - CHAIN_TOL,
    }
}

/// The arithmetic from the entropy bound to the count, one line per value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirlingChain {
    /// `(n/k) ln((k/n)·C(n,d)/C(k,d)·C(n−d,k−d)·p) − (1−1/k)n`.
    pub from_bound: f64,
    /// `(n/k) ln((k/n)·C(n,k)·p) − (1−1/k)n`.
    pub collapsed: f64,
    /// `(n/k) ln(k/n) + n ln n − (n/k) ln k! + (n/k) ln p − (1−1/k)n`.
    pub expanded: f64,
    /// Stirling form of `ln Φ(K_n^(k))`.
    pub ln_phi_complete_stirling: f64,
    pub ln_phi_complete: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountSource {
    Exact,
    EntropyRoute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub gamma: f64,
    /// `δ_d(G)/C(n−d,k−d)`.
    pub p: f64,
    /// `ln Φ(K_n^(k)) + (n/k) ln p`.
    pub target: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi: Option<String>,
    pub ln_phi: f64,
    pub ln_phi_source: CountSource,
    /// `ln Φ(G) − target`.
    pub residual: f64,
    pub residual_per_n: f64,
    pub bound: f64,
    pub h_solver: f64,
    pub solver_converged: bool,
    pub h_pullback: f64,
    pub lemma_check: bool,
    pub lift: LiftSolveReport,
    pub chain: BoundChain,
    pub stirling: StirlingChain,
}

/// Lift, solve, pull back, and compare against the complete-graph count.
pub fn lower_bound_report(g: &Hypergraph, params: &DiracParams) -> Result<LowerBoundReport> {
    params.check(g.k())?;
    let (n, k, d) = (g.n(), g.k(), params.d);
    check_range(k, d)?;
    if n % k != 0 {
        return invalid(format!("k = {k} does not divide n = {n}"));
    }
    let lift = lift(g, d)?;
    let (x, solve) = bipartite_max_entropy_with(&lift, &lift_solver_options(), false)?;
    let pulled = pull_back(g, &lift, &x, 1e-8)?;
    let chain = bound_chain(&lift, &x, &pulled);

    let (nf, kf) = (n as f64, k as f64);
    let m = nf / kf;
    let delta_d = solve.degrees.delta_d as f64;
    let p = delta_d / binomial_f64(n - d, k - d);
    let ln_phi_k = ln_phi_complete(n, k);
    let target = ln_phi_k + m * p.ln();
    let tail = (1.0 - 1.0 / kf) * nf;
    let stirling = StirlingChain {
        from_bound: m
            * (kf / nf * binomial_f64(n, d) / binomial_f64(k, d) * binomial_f64(n - d, k - d) * p)
                .ln()
            - tail,
        collapsed: m * (kf / nf * binomial_f64(n, k) * p).ln() - tail,
        expanded: m * (kf / nf).ln() + nf * nf.ln() - m * ln_factorial(k as u64) + m * p.ln()
            - tail,
        ln_phi_complete_stirling: nf * nf.ln() + m * (kf / nf).ln()
            - tail
            - m * ln_factorial(k as u64),
        ln_phi_complete: ln_phi_k,
    };

    let (h_solver, solver_converged) = match max_entropy_fpm(g, FEAS_TOL, 200_000) {
        Ok((_, rep)) => (rep.entropy, rep.converged),
        Err(Error::Infeasible(_)) => (f64::NEG_INFINITY, false),
        Err(e) => return Err(e),
    };
    let (phi, ln_phi, source) = if n <= DEFAULT_VERTEX_CAP {
        let c = count_pm(g)?;
        (
            Some(c.value.to_string()),
            ln_big(&c.value),
            CountSource::Exact,
        )
    } else {
        (None, h_solver - tail, CountSource::EntropyRoute)
    };
    let residual = ln_phi - target;
    Ok(LowerBoundReport {
        n,
        k,
        d,
        gamma: params.gamma,
        p,
        target,
        phi,
        ln_phi,
        ln_phi_source: source,
        residual,
        residual_per_n: residual / nf,
        bound: chain.bound,
        h_solver,
        solver_converged,
        h_pullback: pulled.entropy(),
        lemma_check: solve.lemma.hypothesis && solve.lemma.holds,
        lift: solve,
        chain,
        stirling,
    })
}
