//! Shifting structures, the shift operation, the anneal-and-shift loop and
//! the Monte Carlo well-distributed fractional perfect matching.

use serde::{Deserialize, Serialize};

use crate::combin::binomial_f64;
use crate::counting::{mask_of, PmCounter};
use crate::entropy::{
    convex_combine, is_fractional_pm, plogp, scale_to_feasible, vertex_system,
    well_distributed_factor, EdgeWeights, SolverOptions, FEAS_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::hypergraph::{DiracParams, Hypergraph};
use crate::rng::{derive_seed, seeded};
use num_traits::Zero;
use rand::Rng;

/// `(e, f, U_2, …, U_k)` with `e ∩ f = {v1}`.
///
/// `v[i]` and `u[i]` are the `(i+2)`-th smallest vertices of `e \ {v1}` and
/// `f \ {v1}`; `e_ids[0] = e`, `f_ids[0] = f` and for `i ≥ 1`,
/// `e_ids[i] = U ∪ {u}`, `f_ids[i] = U ∪ {v}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftingStructure {
    pub e: usize,
    pub f: usize,
    pub v1: usize,
    pub v: Vec<usize>,
    pub u: Vec<usize>,
    pub sets: Vec<Vec<usize>>,
    pub e_ids: Vec<usize>,
    pub f_ids: Vec<usize>,
}

impl ShiftingStructure {
    /// Direct check of intersection, disjointness and edge membership.
    pub fn validate(&self, g: &Hypergraph) -> Result<()> {
        let e = g.edge(self.e);
        let f = g.edge(self.f);
        let shared: Vec<usize> = e.iter().copied().filter(|v| f.contains(v)).collect();
        if shared != [self.v1] {
            return invalid("e and f must share exactly the vertex v1");
        }
        let mut used: Vec<usize> = e.iter().chain(f).copied().collect();
        for (i, set) in self.sets.iter().enumerate() {
            if set.len() + 1 != g.k() || set.iter().any(|v| used.contains(v)) {
                return invalid(format!(
                    "U_{} overlaps earlier vertices or has the wrong size",
                    i + 2
                ));
            }
            used.extend(set);
            let mut ei = set.clone();
            ei.push(self.u[i]);
            ei.sort_unstable();
            let mut fi = set.clone();
            fi.push(self.v[i]);
            fi.sort_unstable();
            if g.edge_id(&ei) != Some(self.e_ids[i + 1])
                || g.edge_id(&fi) != Some(self.f_ids[i + 1])
            {
                return invalid(format!("e_{0} or f_{0} is not the recorded edge", i + 2));
            }
        }
        if self.e_ids[0] != self.e || self.f_ids[0] != self.f {
            return invalid("e_1 and f_1 must be e and f");
        }
        Ok(())
    }
}

fn split_pair(g: &Hypergraph, e: usize, f: usize) -> Result<(usize, Vec<usize>, Vec<usize>)> {
    if e >= g.num_edges() || f >= g.num_edges() {
        return invalid("edge id out of range");
    }
    let (ev, fv) = (g.edge(e), g.edge(f));
    let shared: Vec<usize> = ev.iter().copied().filter(|v| fv.contains(v)).collect();
    if shared.len() != 1 {
        return invalid(format!(
            "edges {e} and {f} share {} vertices, expected exactly 1",
            shared.len()
        ));
    }
    let v1 = shared[0];
    let v = ev.iter().copied().filter(|&x| x != v1).collect();
    let u = fv.iter().copied().filter(|&x| x != v1).collect();
    Ok((v1, v, u))
}

/// Greedy structure search: for `i = 2..k`, `U_i` is the lexicographically
/// smallest `(k−1)`-set avoiding `e ∪ f` and earlier choices such that both
/// `U_i ∪ {u_i}` and `U_i ∪ {v_i}` are edges.
///
/// With `min_degree_check`, returns `None` unless every vertex of
/// `(e ∪ f) \ {v1}` has degree above `C(n−1, k−1)/2`.
pub fn find_shifting_structure(
    g: &Hypergraph,
    e: usize,
    f: usize,
    min_degree_check: bool,
) -> Result<Option<ShiftingStructure>> {
    let (v1, v, u) = split_pair(g, e, f)?;
    if min_degree_check {
        let half = binomial_f64(g.n() - 1, g.k() - 1) / 2.0;
        if v.iter()
            .chain(&u)
            .any(|&w| g.incident(w).len() as f64 <= half)
        {
            return Ok(None);
        }
    }
    Ok(search(g, e, f, v1, v, u, &|_| true, &|_| true))
}

/// Structure search restricted by predicates on the edges `e_i` (`e_ok`) and
/// `f_i` (`f_ok`) for `i ≥ 2`.
pub fn find_shifting_structure_filtered(
    g: &Hypergraph,
    e: usize,
    f: usize,
    e_ok: &dyn Fn(usize) -> bool,
    f_ok: &dyn Fn(usize) -> bool,
) -> Result<Option<ShiftingStructure>> {
    let (v1, v, u) = split_pair(g, e, f)?;
    Ok(search(g, e, f, v1, v, u, e_ok, f_ok))
}

#[allow(clippy::too_many_arguments)]
fn search(
    g: &Hypergraph,
    e: usize,
    f: usize,
    v1: usize,
    v: Vec<usize>,
    u: Vec<usize>,
    e_ok: &dyn Fn(usize) -> bool,
    f_ok: &dyn Fn(usize) -> bool,
) -> Option<ShiftingStructure> {
    let mut used = vec![false; g.n()];
    for &w in g.edge(e).iter().chain(g.edge(f)) {
        used[w] = true;
    }
    let mut sets = Vec::new();
    let mut e_ids = vec![e];
    let mut f_ids = vec![f];
    let mut buf = Vec::with_capacity(g.k());
    for (&vi, &ui) in v.iter().zip(&u) {
        let mut best: Option<(Vec<usize>, usize, usize)> = None;
        for &gid in g.incident(ui) {
            let cand: Vec<usize> = g.edge(gid).iter().copied().filter(|&w| w != ui).collect();
            if cand.iter().any(|&w| used[w]) || !e_ok(gid) {
                continue;
            }
            if best.as_ref().is_some_and(|(b, _, _)| *b <= cand) {
                continue;
            }
            buf.clear();
            buf.extend_from_slice(&cand);
            let pos = buf.partition_point(|&w| w < vi);
            buf.insert(pos, vi);
            if let Some(fid) = g.edge_id(&buf) {
                if f_ok(fid) {
                    best = Some((cand, gid, fid));
                }
            }
        }
        let (set, eid, fid) = best?;
        for &w in &set {
            used[w] = true;
        }
        sets.push(set);
        e_ids.push(eid);
        f_ids.push(fid);
    }
    Some(ShiftingStructure {
        e,
        f,
        v1,
        v,
        u,
        sets,
        e_ids,
        f_ids,
    })
}

fn check_shift(x: &[f64], s: &ShiftingStructure, delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return invalid(format!("shift amount {delta} must be nonnegative"));
    }
    for &id in &s.e_ids {
        if x[id] < delta {
            return invalid(format!("edge {id} has weight {} < delta = {delta}", x[id]));
        }
    }
    for &id in &s.f_ids {
        if 1.0 - x[id] < delta {
            return invalid(format!("edge {id} has weight {} > 1 - delta", x[id]));
        }
    }
    Ok(())
}

/// `x[e_i] −= Δ`, `x[f_i] += Δ` for all `i`; verified status is kept.
pub fn apply_shift(x: &EdgeWeights, s: &ShiftingStructure, delta: f64) -> Result<EdgeWeights> {
    let mut w = x.weights().to_vec();
    check_shift(&w, s, delta)?;
    shift_in_place(&mut w, s, delta);
    let out = EdgeWeights::new(w)?;
    Ok(if x.is_verified() {
        out.into_verified_unchecked()
    } else {
        out
    })
}

fn shift_in_place(w: &mut [f64], s: &ShiftingStructure, delta: f64) {
    for &id in &s.e_ids {
        w[id] -= delta;
    }
    for &id in &s.f_ids {
        w[id] += delta;
    }
}

/// `Δ ln(x[e_1] Δ^{k−1} / (2η^k))`, valid when every `x[e_i] ≥ 2Δ` and every
/// `x[f_i] ≤ η − Δ`.
pub fn shift_gain_lower_bound(
    x: &[f64],
    s: &ShiftingStructure,
    delta: f64,
    eta: f64,
) -> Result<f64> {
    if !(delta > 0.0) || !(eta > 0.0) {
        return invalid("delta and eta must be positive");
    }
    // Hypotheses are checked up to rounding of 2Δ and η − Δ.
    let slack = 1e-12 * eta.max(delta);
    if let Some(&id) = s.e_ids.iter().find(|&&id| x[id] < 2.0 * delta - slack) {
        return invalid(format!("edge {id} has weight {} < 2 delta", x[id]));
    }
    if let Some(&id) = s.f_ids.iter().find(|&&id| x[id] > eta - delta + slack) {
        return invalid(format!("edge {id} has weight {} > eta - delta", x[id]));
    }
    Ok(gain_bound(x[s.e], s.e_ids.len(), delta, eta))
}

fn gain_bound(x_e1: f64, k: usize, delta: f64, eta: f64) -> f64 {
    let k = k as i32;
    delta * (x_e1.ln() + (k - 1) as f64 * delta.ln() - 2f64.ln() - k as f64 * eta.ln())
}

/// Parameters of the anneal-and-shift loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub epsilon: f64,
    /// Well-distributedness constant of the base matching.
    pub c: f64,
    pub gamma: f64,
    /// `η = (4/γ)/C(n−1, k−1)`.
    pub eta: f64,
    /// `Δ = ε/(2C² n^{k−1})`.
    pub delta: f64,
    /// `D = ε^{−3k}`.
    pub d: f64,
    pub max_steps: usize,
    /// Heavy-edge threshold `D/n^{k−1}`.
    pub heavy: f64,
    /// Whether `Δ^{k−1}/(2 n^{k−1} η^k) ≥ 1/√D`.
    pub sqrt_d_check: bool,
}

impl AnnealParams {
    pub fn new(g: &Hypergraph, gamma: f64, epsilon: f64, c: f64, max_steps: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !(c > 0.0) || !(gamma > 0.0) {
            return invalid("epsilon, C and gamma must be positive");
        }
        if epsilon > c {
            return invalid(format!(
                "epsilon = {epsilon} exceeds C = {c}, so the mixture is undefined"
            ));
        }
        let n = g.n() as f64;
        let k = g.k();
        let nk1 = n.powi(k as i32 - 1);
        let eta = (4.0 / gamma) / binomial_f64(g.n() - 1, k - 1);
        let delta = epsilon / (2.0 * c * c * nk1);
        let d = epsilon.powf(-3.0 * k as f64);
        let heavy = d / nk1;
        if !(eta - delta > 0.0) {
            return invalid(format!("eta - delta = {} must be positive", eta - delta));
        }
        if !(heavy >= 2.0 * delta) {
            return invalid(format!(
                "D/n^(k-1) = {heavy:.3e} must be at least 2 delta = {:.3e}",
                2.0 * delta
            ));
        }
        let sqrt_d_check =
            delta.powi(k as i32 - 1) / (2.0 * nk1 * eta.powi(k as i32)) >= 1.0 / d.sqrt();
        Ok(Self {
            epsilon,
            c,
            gamma,
            eta,
            delta,
            d,
            max_steps,
            heavy,
            sqrt_d_check,
        })
    }

    /// Largest `ε = 10^{-3}·1.25^j ≤ min(C, 1)` for which the invariants hold
    /// and the final weight floor `Δ` is itself `D`-well-distributed, i.e.
    /// `1/(Δ n^{k−1}) ≤ D`.
    pub fn auto(g: &Hypergraph, gamma: f64, c: f64, max_steps: usize) -> Result<Self> {
        let nk1 = (g.n() as f64).powi(g.k() as i32 - 1);
        let mut best = None;
        let mut eps = 1e-3;
        while eps <= c.min(1.0) {
            if let Ok(p) = Self::new(g, gamma, eps, c, max_steps) {
                if 1.0 / (p.delta * nk1) <= p.d {
                    best = Some(p);
                }
            }
            eps *= 1.25;
        }
        best.ok_or_else(|| {
            Error::InvalidArgument("no epsilon on the grid satisfies the anneal invariants".into())
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodConfiguration {
    pub structure: ShiftingStructure,
    /// `x[e_1]`.
    pub heavy_weight: f64,
    pub min_e_weight: f64,
    pub max_f_weight: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigSearch {
    Found(GoodConfiguration),
    NoHighWeightEdge,
    SearchExhausted,
}

/// First good configuration in scan order.
///
/// Heavy edges `e` (`x[e] ≥ D/n^{k−1}`) are tried in id order, then `v1 ∈ e`
/// ascending, then partners `f ∋ v1` in id order with `e ∩ f = {v1}` and
/// `x[f] ≤ η − Δ`. A structure is accepted when its `e_i` have weight
/// `≥ 2Δ`, its `f_i` have weight `≤ η − Δ` and
/// `Π(x[e_i] − Δ) ≥ Π(x[f_i] + Δ)`, which makes the shift entropy-increasing.
pub fn find_good_configuration(g: &Hypergraph, x: &[f64], p: &AnnealParams) -> ConfigSearch {
    let lo = 2.0 * p.delta;
    let hi = p.eta - p.delta;
    let mut any_heavy = false;
    for e in 0..g.num_edges() {
        if x[e] < p.heavy || x[e] < lo {
            continue;
        }
        any_heavy = true;
        for &v1 in g.edge(e) {
            for &f in g.incident(v1) {
                if x[f] > hi {
                    continue;
                }
                let shared = g.edge(f).iter().filter(|w| g.edge(e).contains(w)).count();
                if shared != 1 {
                    continue;
                }
                let e_ok = |id: usize| x[id] >= lo;
                let f_ok = |id: usize| x[id] <= hi;
                let Ok(Some(s)) = find_shifting_structure_filtered(g, e, f, &e_ok, &f_ok) else {
                    continue;
                };
                let down: f64 = s.e_ids.iter().map(|&id| (x[id] - p.delta).ln()).sum();
                let up: f64 = s.f_ids.iter().map(|&id| (x[id] + p.delta).ln()).sum();
                if down < up {
                    continue;
                }
                let bound = gain_bound(x[e], g.k(), p.delta, p.eta);
                return ConfigSearch::Found(GoodConfiguration {
                    heavy_weight: x[e],
                    min_e_weight: s
                        .e_ids
                        .iter()
                        .map(|&id| x[id])
                        .fold(f64::INFINITY, f64::min),
                    max_f_weight: s.f_ids.iter().map(|&id| x[id]).fold(0.0, f64::max),
                    bound,
                    structure: s,
                });
            }
        }
    }
    if any_heavy {
        ConfigSearch::SearchExhausted
    } else {
        ConfigSearch::NoHighWeightEdge
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealStep {
    pub step: usize,
    pub e_ids: Vec<usize>,
    pub f_ids: Vec<usize>,
    pub delta: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnealStop {
    NoHighWeightEdge,
    SearchExhausted,
    StepLimit,
}

#[derive(Clone, Debug)]
pub struct AnnealResult {
    pub weights: EdgeWeights,
    pub x0_entropy: f64,
    pub steps: Vec<AnnealStep>,
    pub stop: AnnealStop,
    pub min_weight: f64,
    pub well_distributed_factor: f64,
    pub renormalizations: usize,
    /// Largest vertex-sum drift seen at a renormalization check.
    pub max_drift: f64,
}

impl AnnealResult {
    pub fn search_exhausted(&self) -> bool {
        self.stop == AnnealStop::SearchExhausted
    }

    /// `εn / (Δ ln(D)/2) + 1`.
    pub fn step_budget(&self, n: usize, p: &AnnealParams) -> f64 {
        p.epsilon * n as f64 / (p.delta * p.d.ln() / 2.0) + 1.0
    }
}

const RENORMALIZE_EVERY: usize = 10_000;

/// Mixes `x0 = (1 − ε/C) x* + (ε/C) x̂`, then shifts by `Δ` at good
/// configurations until none is left or `max_steps` is reached.
pub fn anneal_and_shift(
    g: &Hypergraph,
    x_star: &EdgeWeights,
    x_hat: &EdgeWeights,
    p: &AnnealParams,
) -> Result<AnnealResult> {
    let x0 = convex_combine(x_star, x_hat, p.epsilon / p.c)?;
    let mut w = x0.weights().to_vec();
    let x0_entropy = x0.entropy();
    let mut h = x0_entropy;
    let mut steps = Vec::new();
    let mut renormalizations = 0;
    let mut max_drift: f64 = 0.0;
    let stop = loop {
        if steps.len() >= p.max_steps {
            break AnnealStop::StepLimit;
        }
        let cfg = match find_good_configuration(g, &w, p) {
            ConfigSearch::Found(c) => c,
            ConfigSearch::NoHighWeightEdge => break AnnealStop::NoHighWeightEdge,
            ConfigSearch::SearchExhausted => break AnnealStop::SearchExhausted,
        };
        let s = &cfg.structure;
        let touched: Vec<usize> = s.e_ids.iter().chain(&s.f_ids).copied().collect();
        let before: f64 = touched.iter().map(|&id| plogp(w[id])).sum();
        shift_in_place(&mut w, s, p.delta);
        let after: f64 = touched.iter().map(|&id| plogp(w[id])).sum();
        let h_next = h + (after - before);
        steps.push(AnnealStep {
            step: steps.len() + 1,
            e_ids: s.e_ids.clone(),
            f_ids: s.f_ids.clone(),
            delta: p.delta,
            entropy_before: h,
            entropy_after: h_next,
            bound: cfg.bound,
        });
        h = h_next;
        if steps.len() % RENORMALIZE_EVERY == 0 {
            let drift = is_fractional_pm(g, &w, f64::INFINITY)?.worst_residual;
            max_drift = max_drift.max(drift);
            if drift > 1e-12 {
                renormalize(g, &mut w)?;
                renormalizations += 1;
            }
            h = w.iter().map(|&x| plogp(x)).sum();
        }
    };
    let drift = is_fractional_pm(g, &w, f64::INFINITY)?.worst_residual;
    max_drift = max_drift.max(drift);
    let weights = EdgeWeights::verified(g, w, FEAS_TOL)?;
    Ok(AnnealResult {
        min_weight: weights.min_weight(),
        well_distributed_factor: well_distributed_factor(g, weights.weights()),
        weights,
        x0_entropy,
        steps,
        stop,
        renormalizations,
        max_drift,
    })
}

fn renormalize(g: &Hypergraph, w: &mut [f64]) -> Result<()> {
    let sys = vertex_system(g);
    let opts = SolverOptions {
        tol: 1e-14,
        max_iter: 1000,
        ..SolverOptions::default()
    };
    let out = scale_to_feasible(&sys, w, &vec![0.0; g.n()], &opts)?;
    w.copy_from_slice(&out.values);
    Ok(())
}

#[derive(Clone, Debug)]
pub struct WellDistributedReport {
    pub weights: EdgeWeights,
    pub trials: usize,
    /// Greedy prefixes whose residual had no perfect matching.
    pub retries: usize,
    pub greedy_rounds: usize,
    pub zero_hit_edges: usize,
    /// Empirical `Pr[e ∈ M]` before projection.
    pub empirical: Vec<f64>,
    pub well_distributed_factor: f64,
}

const MAX_RETRIES: usize = 100;

/// Monte Carlo estimate of the edge marginals of a hybrid random perfect
/// matching, projected onto the fractional perfect matchings.
///
/// Each trial removes `⌊βn⌋` uniformly random edges greedily
/// (`β = γ/(10k²)`) and completes the rest by an exactly uniform perfect
/// matching of the residual graph. Trial `t` draws from
/// `derive_seed(seed, t)`; its `r`-th resample after a dead end from
/// `derive_seed(derive_seed(seed, t), r)`. The empirical marginals are then
/// scaled to unit vertex sums, so edges never hit stay at weight 0.
pub fn well_distributed_fpm(
    g: &Hypergraph,
    params: &DiracParams,
    seed: u64,
    trials: usize,
) -> Result<WellDistributedReport> {
    params.check(g.k())?;
    if trials == 0 {
        return invalid("trials must be positive");
    }
    let beta = params.gamma / (10.0 * (g.k() * g.k()) as f64);
    let rounds = (beta * g.n() as f64).floor() as usize;
    let mut counter = PmCounter::new(g)?;
    let full = counter.full_mask();
    let masks: Vec<u64> = g.edges().iter().map(|e| mask_of(e)).collect();
    let mut hits = vec![0u64; g.num_edges()];
    let mut retries = 0;
    for t in 0..trials {
        let trial_seed = derive_seed(seed, t as u64);
        let mut attempt = 0;
        let pm = loop {
            let s = if attempt == 0 {
                trial_seed
            } else {
                derive_seed(trial_seed, attempt as u64)
            };
            let mut rng = seeded(s);
            let mut rest = full;
            let mut chosen = Vec::new();
            for _ in 0..rounds {
                let alive: Vec<usize> = (0..masks.len())
                    .filter(|&i| masks[i] & rest == masks[i])
                    .collect();
                if alive.is_empty() {
                    break;
                }
                let id = alive[rng.gen_range(0..alive.len())];
                rest &= !masks[id];
                chosen.push(id);
            }
            if !counter.count_mask(rest)?.is_zero() {
                chosen.extend(counter.sample_mask(rest, &mut rng)?);
                break chosen;
            }
            attempt += 1;
            retries += 1;
            if attempt > MAX_RETRIES {
                return Err(Error::Sampling(format!(
                    "trial {t}: {MAX_RETRIES} greedy prefixes left no perfect matching"
                )));
            }
        };
        for id in pm {
            hits[id] += 1;
        }
    }
    let empirical: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    let zero_hit_edges = hits.iter().filter(|&&h| h == 0).count();
    let sys = vertex_system(g);
    let opts = SolverOptions {
        tol: 1e-10,
        max_iter: 100_000,
        ..SolverOptions::default()
    };
    let out = scale_to_feasible(&sys, &empirical, &vec![0.0; g.n()], &opts)?;
    let weights = EdgeWeights::verified(g, out.values, FEAS_TOL)?;
    Ok(WellDistributedReport {
        well_distributed_factor: well_distributed_factor(g, weights.weights()),
        weights,
        trials,
        retries,
        greedy_rounds: rounds,
        zero_hit_edges,
        empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(g: &Hypergraph, e: &[usize]) -> usize {
        g.edge_id(e).unwrap()
    }

    #[test]
    fn four_cycle_in_k8() {
        let g = Hypergraph::complete(8, 2).unwrap();
        let s = find_shifting_structure(&g, id(&g, &[0, 1]), id(&g, &[0, 2]), true)
            .unwrap()
            .unwrap();
        assert_eq!(s.sets, vec![vec![3]]);
        s.validate(&g).unwrap();
    }

    #[test]
    fn structure_in_k9() {
        let g = Hypergraph::complete(9, 3).unwrap();
        let s = find_shifting_structure(&g, id(&g, &[0, 1, 2]), id(&g, &[0, 3, 4]), true)
            .unwrap()
            .unwrap();
        assert_eq!(s.sets, vec![vec![5, 6], vec![7, 8]]);
        assert_eq!(s.e_ids[1], id(&g, &[3, 5, 6]));
        assert_eq!(s.f_ids[1], id(&g, &[1, 5, 6]));
        s.validate(&g).unwrap();
    }

    #[test]
    fn disjoint_edges_are_rejected() {
        let g = Hypergraph::new(3, 6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert!(matches!(
            find_shifting_structure(&g, 0, 1, false),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            find_shifting_structure(&g, 0, 0, false),
            Err(Error::InvalidArgument(_))
        ));
    }

    /// The 4-cycle 0-1-3-2 inside K_4 with weights on e_1, e_2, f_1, f_2.
    fn k2_example() -> (Hypergraph, ShiftingStructure, Vec<f64>) {
        let g = Hypergraph::complete(4, 2).unwrap();
        let s = find_shifting_structure(&g, id(&g, &[0, 1]), id(&g, &[0, 2]), false)
            .unwrap()
            .unwrap();
        let mut w = vec![0.0; 6];
        for &e in &s.e_ids {
            w[e] = 0.5;
        }
        for &f in &s.f_ids {
            w[f] = 0.1;
        }
        (g, s, w)
    }

    #[test]
    fn shift_example_values() {
        let (_, s, w) = k2_example();
        let x = EdgeWeights::new(w.clone()).unwrap();
        assert!((x.entropy() - 1.1537).abs() < 1e-4);
        let y = apply_shift(&x, &s, 0.2).unwrap();
        for id in s.e_ids.iter().chain(&s.f_ids) {
            assert!((y.weights()[*id] - 0.3).abs() < 1e-15);
        }
        assert!((y.entropy() - 1.2 * (10.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((y.entropy() - 1.4446).abs() < 5e-4);
        let bound = shift_gain_lower_bound(&w, &s, 0.2, 0.3).unwrap();
        assert!((bound - 0.2 * (0.5f64 * 0.2 / (2.0 * 0.09)).ln()).abs() < 1e-12);
        assert!((bound + 0.1175).abs() < 1e-4);
        assert!(y.entropy() - x.entropy() >= bound);
        assert_eq!(apply_shift(&x, &s, 0.0).unwrap().weights(), x.weights());
        assert!(apply_shift(&x, &s, 0.6).is_err());
        assert!(shift_gain_lower_bound(&w, &s, 0.3, 0.3).is_err());
    }

    #[test]
    fn zero_bound_at_equality() {
        // x[e1] Δ^{k-1} = 2 η^k with k = 2, Δ = 0.1, η = 0.1: x[e1] = 0.2.
        assert!(gain_bound(0.2, 2, 0.1, 0.1).abs() < 1e-15);
    }

    #[test]
    fn no_room_for_structure_in_k6() {
        let g = Hypergraph::complete(6, 3).unwrap();
        let s = find_shifting_structure(&g, id(&g, &[0, 1, 2]), id(&g, &[0, 3, 4]), false).unwrap();
        assert!(s.is_none());
    }

    #[test]
    fn shift_preserves_vertex_sums() {
        let g9 = Hypergraph::complete(9, 3).unwrap();
        let w = vec![1.0 / 28.0; 84];
        let x9 = EdgeWeights::verified(&g9, w, FEAS_TOL).unwrap();
        let s9 = find_shifting_structure(&g9, 0, id(&g9, &[0, 3, 4]), false)
            .unwrap()
            .unwrap();
        let y = apply_shift(&x9, &s9, 0.01).unwrap();
        let before = crate::entropy::vertex_sums(&g9, x9.weights()).unwrap();
        let after = crate::entropy::vertex_sums(&g9, y.weights()).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(y.is_verified());
    }

    #[test]
    fn good_configurations() {
        let k6 = Hypergraph::complete(6, 3).unwrap();
        let p = AnnealParams {
            epsilon: 0.5,
            c: 4.0,
            gamma: 0.1,
            eta: 4.0,
            delta: 1e-3,
            d: 4.0,
            max_steps: 10,
            heavy: 4.0 / 36.0,
            sqrt_d_check: false,
        };
        assert_eq!(
            find_good_configuration(&k6, &[0.1; 20], &p),
            ConfigSearch::NoHighWeightEdge
        );

        let g = Hypergraph::complete(9, 3).unwrap();
        let mut w = vec![0.0; 84];
        for pm in [
            [[0, 1, 2], [3, 4, 5], [6, 7, 8]],
            [[0, 3, 6], [1, 4, 7], [2, 5, 8]],
            [[0, 4, 8], [1, 5, 6], [2, 3, 7]],
        ] {
            for e in pm {
                w[id(&g, &e)] += 1.0 / 3.0;
            }
        }
        let eps = 0.1;
        let mixed: Vec<f64> = w.iter().map(|x| (1.0 - eps) * x + eps / 28.0).collect();
        let p9 = AnnealParams::new(&g, 0.1, 0.6, 3.0, 100).unwrap();
        let p9 = AnnealParams {
            heavy: 10.0 / 81.0,
            d: 10.0,
            ..p9
        };
        let found = find_good_configuration(&g, &mixed, &p9);
        let ConfigSearch::Found(cfg) = &found else {
            panic!("expected a configuration, got {found:?}")
        };
        cfg.structure.validate(&g).unwrap();
        assert!(cfg.heavy_weight >= 10.0 / 81.0);
        assert_eq!(find_good_configuration(&g, &mixed, &p9), found);
    }

    #[test]
    fn params_validation() {
        let g = Hypergraph::complete(9, 3).unwrap();
        assert!(AnnealParams::new(&g, 0.1, 0.5, 3.0, 10).is_ok());
        assert!(AnnealParams::new(&g, 0.1, 4.0, 3.0, 10).is_err());
        let p = AnnealParams::auto(&g, 0.1, 3.6, 10).unwrap();
        assert!(p.eta > p.delta && p.heavy >= 2.0 * p.delta);
    }

    #[test]
    fn well_distributed_on_k6() {
        let g = Hypergraph::complete(6, 3).unwrap();
        let p = DiracParams::new(2, 0.1).unwrap();
        let rep = well_distributed_fpm(&g, &p, 11, 100_000).unwrap();
        assert!(rep.empirical.iter().all(|&x| (x - 0.1).abs() < 0.02));
        assert!(
            is_fractional_pm(&g, rep.weights.weights(), 1e-8)
                .unwrap()
                .ok
        );
        assert_eq!(rep.zero_hit_edges, 0);
    }
}
