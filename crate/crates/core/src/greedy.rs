//! The weight-guided random greedy matching process.
//!
//! At step `i` an edge of the residual graph `G(i−1)` is drawn with
//! probability proportional to its weight, and its `k` vertices are deleted.
//! The process freezes once no positive-weight edge remains.

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin::binomial_u128;
use crate::counting::{mask_of, PmCounter};
use crate::entropy::{is_fractional_pm, plogp, well_distributed_factor, EdgeWeights};
use crate::error::{invalid, Error, Result};
use crate::hypergraph::{is_subset, Hypergraph};
use crate::rng::{derive_seed, seeded};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop after the first step `i > (1 − n^{−c})·n/k`.
    Fraction,
    UntilFreeze,
    MaxSteps(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Trajectory exponent, `0 < c < 1`.
    pub c: f64,
    pub stop: StopRule,
    /// Random tracked sets drawn for each size `2..k−1`.
    pub sets_per_size: usize,
    pub tracked_seed: u64,
    /// Replaces the default tracked sets when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked: Option<Vec<Vec<usize>>>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            c: 0.05,
            stop: StopRule::Fraction,
            sets_per_size: 100,
            tracked_seed: 0,
            tracked: None,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return invalid(format!(
                "trajectory exponent c = {} must lie in (0, 1)",
                self.c
            ));
        }
        Ok(())
    }

    /// `(1 − n^{−c})·n/k`.
    pub fn horizon(&self, n: usize, k: usize) -> f64 {
        (1.0 - (n as f64).powf(-self.c)) * n as f64 / k as f64
    }
}

/// Tracked sets: every singleton, then up to `sets_per_size` distinct sets of
/// each size `2..k−1`. Size `s` draws from `derive_seed(tracked_seed, s)`;
/// when `C(n, s)` is at most `sets_per_size` all sets are taken.
pub fn tracked_sets(g: &Hypergraph, cfg: &TrajectoryConfig) -> Result<Vec<Vec<usize>>> {
    if let Some(sets) = &cfg.tracked {
        let mut out = Vec::with_capacity(sets.len());
        for s in sets {
            let mut s = s.clone();
            s.sort_unstable();
            if s.len() >= g.k()
                || s.iter().any(|&v| v >= g.n())
                || s.windows(2).any(|w| w[0] == w[1])
            {
                return invalid(format!(
                    "tracked set {s:?} is not a set of at most k-1 vertices"
                ));
            }
            out.push(s);
        }
        return Ok(out);
    }
    let mut out: Vec<Vec<usize>> = (0..g.n()).map(|v| vec![v]).collect();
    for size in 2..g.k() {
        let total = binomial_u128(g.n() as u64, size as u64).unwrap_or(u128::MAX);
        if total <= cfg.sets_per_size as u128 {
            out.extend((0..g.n()).combinations(size));
            continue;
        }
        let mut rng = seeded(derive_seed(cfg.tracked_seed, size as u64));
        let mut chosen = BTreeSet::new();
        while chosen.len() < cfg.sets_per_size {
            let mut s = sample(&mut rng, g.n(), size).into_vec();
            s.sort_unstable();
            chosen.insert(s);
        }
        out.extend(chosen);
    }
    Ok(out)
}

/// Precomputed data shared by every run on one `(G, x, cfg)`.
pub struct GreedyPlan<'a> {
    g: &'a Hypergraph,
    x: &'a [f64],
    cfg: TrajectoryConfig,
    tracked: Vec<Vec<usize>>,
    /// CSR: tracked-set ids contained in each edge.
    edge_sets_start: Vec<usize>,
    edge_sets: Vec<usize>,
    initial_degrees: Vec<u64>,
    positive: Vec<usize>,
    h: f64,
    digest: String,
}

impl<'a> GreedyPlan<'a> {
    pub fn new(g: &'a Hypergraph, x: &'a EdgeWeights, cfg: &TrajectoryConfig) -> Result<Self> {
        cfg.validate()?;
        if x.len() != g.num_edges() {
            return invalid(format!("{} weights for {} edges", x.len(), g.num_edges()));
        }
        let tracked = tracked_sets(g, cfg)?;
        let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); g.n()];
        for (sid, s) in tracked.iter().enumerate() {
            if let Some(&v) = s.first() {
                by_vertex[v].push(sid);
            }
        }
        let mut edge_sets_start = Vec::with_capacity(g.num_edges() + 1);
        let mut edge_sets = Vec::new();
        let mut initial_degrees = vec![0u64; tracked.len()];
        for (sid, s) in tracked.iter().enumerate() {
            if s.is_empty() {
                initial_degrees[sid] = g.num_edges() as u64;
            }
        }
        for e in g.edges() {
            edge_sets_start.push(edge_sets.len());
            for &v in e {
                for &sid in &by_vertex[v] {
                    if is_subset(&tracked[sid], e) {
                        edge_sets.push(sid);
                        initial_degrees[sid] += 1;
                    }
                }
            }
        }
        edge_sets_start.push(edge_sets.len());
        let w = x.weights();
        Ok(Self {
            g,
            x: w,
            cfg: cfg.clone(),
            tracked,
            edge_sets_start,
            edge_sets,
            initial_degrees,
            positive: (0..w.len()).filter(|&i| w[i] > 0.0).collect(),
            h: x.entropy(),
            digest: g.digest(),
        })
    }

    pub fn tracked(&self) -> &[Vec<usize>] {
        &self.tracked
    }

    pub fn initial_degrees(&self) -> &[u64] {
        &self.initial_degrees
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.cfg
    }

    pub fn entropy(&self) -> f64 {
        self.h
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    fn step_limit(&self) -> usize {
        let m = self.g.n() / self.g.k();
        match self.cfg.stop {
            StopRule::Fraction => {
                let h = self.cfg.horizon(self.g.n(), self.g.k());
                (h.floor() as usize + 1).min(m)
            }
            StopRule::UntilFreeze => m,
            StopRule::MaxSteps(s) => s.min(m),
        }
    }

    /// One trajectory. Draw order: one `f64` in `[0, W)` per step against the
    /// alive positive-weight edges in id order.
    pub fn run(&self, seed: u64) -> GreedyTrajectory {
        let g = self.g;
        let mut rng = seeded(seed);
        let mut alive_edge = vec![true; g.num_edges()];
        let mut alive_vertex = vec![true; g.n()];
        let mut degrees = self.initial_degrees.clone();
        let mut pool = self.positive.clone();
        let mut records = Vec::new();
        let mut chosen = Vec::new();
        let limit = self.step_limit();

        let (w0, a0) = sums(&pool, self.x);
        records.push(StepRecord {
            i: 0,
            chosen_edge: None,
            residual_weight: w0,
            residual_entropy: a0,
            alive_vertices: g.n(),
            degrees: degrees.clone(),
        });
        let mut total = w0;
        let stop = loop {
            if pool.is_empty() || !(total > 0.0) {
                break StopReason::NoPositiveWeightEdge;
            }
            if chosen.len() >= limit {
                break StopReason::StepLimit;
            }
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = *pool.last().expect("nonempty pool");
            for &id in &pool {
                acc += self.x[id];
                if target < acc {
                    pick = id;
                    break;
                }
            }
            chosen.push(pick);
            for &v in g.edge(pick) {
                alive_vertex[v] = false;
                for &id in g.incident(v) {
                    if alive_edge[id] {
                        alive_edge[id] = false;
                        for &sid in
                            &self.edge_sets[self.edge_sets_start[id]..self.edge_sets_start[id + 1]]
                        {
                            degrees[sid] -= 1;
                        }
                    }
                }
            }
            pool.retain(|&id| alive_edge[id]);
            let (w, a) = sums(&pool, self.x);
            total = w;
            records.push(StepRecord {
                i: chosen.len(),
                chosen_edge: Some(pick),
                residual_weight: w,
                residual_entropy: a,
                alive_vertices: alive_vertex.iter().filter(|&&b| b).count(),
                degrees: degrees.clone(),
            });
        };
        GreedyTrajectory {
            seed,
            digest: self.digest.clone(),
            chosen,
            records,
            stop,
        }
    }

    pub fn run_many(&self, seeds: &[u64]) -> Vec<GreedyTrajectory> {
        seeds.par_iter().map(|&s| self.run(s)).collect()
    }

    /// `p(i)^k·n/k`, `p(i)^k·h(x)` and `p(i)^{k−|S|}·deg_G(S)`.
    pub fn predicted(&self, i: usize) -> PredictedStats {
        let (n, k) = (self.g.n() as f64, self.g.k() as i32);
        let p = p_of(self.g.n(), self.g.k(), i);
        PredictedStats {
            weight: p.powi(k) * n / k as f64,
            entropy: p.powi(k) * self.h,
            degrees: self
                .tracked
                .iter()
                .zip(&self.initial_degrees)
                .map(|(s, &d)| p.powi(k - s.len() as i32) * d as f64)
                .collect(),
        }
    }
}

fn sums(pool: &[usize], x: &[f64]) -> (f64, f64) {
    pool.iter()
        .fold((0.0, 0.0), |(w, a), &id| (w + x[id], a + plogp(x[id])))
}

/// `p(i) = (n/k − i)/(n/k)`, clamped at 0.
pub fn p_of(n: usize, k: usize, i: usize) -> f64 {
    let m = n as f64 / k as f64;
    ((m - i as f64) / m).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    NoPositiveWeightEdge,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub i: usize,
    pub chosen_edge: Option<usize>,
    pub residual_weight: f64,
    pub residual_entropy: f64,
    pub alive_vertices: usize,
    pub degrees: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrajectory {
    pub seed: u64,
    pub digest: String,
    pub chosen: Vec<usize>,
    /// Records for `i = 0..=chosen.len()`.
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
}

impl GreedyTrajectory {
    /// Freeze time `M` when the process froze.
    pub fn freeze_step(&self) -> Option<usize> {
        (self.stop == StopReason::NoPositiveWeightEdge).then_some(self.chosen.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedStats {
    pub weight: f64,
    pub entropy: f64,
    pub degrees: Vec<f64>,
}

pub fn run_greedy(
    g: &Hypergraph,
    x: &EdgeWeights,
    cfg: &TrajectoryConfig,
    seed: u64,
) -> Result<GreedyTrajectory> {
    Ok(GreedyPlan::new(g, x, cfg)?.run(seed))
}

/// Predicted centers at step `i` for the given tracked sets.
pub fn predicted_stats(
    g: &Hypergraph,
    x: &EdgeWeights,
    tracked: &[Vec<usize>],
    i: usize,
) -> Result<PredictedStats> {
    if i > g.n() / g.k() {
        return invalid(format!("step {i} beyond n/k = {}", g.n() / g.k()));
    }
    let cfg = TrajectoryConfig {
        tracked: Some(tracked.to_vec()),
        ..TrajectoryConfig::default()
    };
    Ok(GreedyPlan::new(g, x, &cfg)?.predicted(i))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDeviation {
    pub i: usize,
    pub weight: f64,
    pub entropy: f64,
    /// Largest relative deviation over tracked sets still alive.
    pub degree: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub steps: Vec<StepDeviation>,
    pub horizon: f64,
    pub max_weight: f64,
    pub max_entropy: f64,
    pub max_degree: f64,
    /// The process ran past the horizon without freezing first.
    pub reached_horizon: bool,
    pub well_distributed_factor: f64,
    /// `well_distributed_factor ≤ n^c`.
    pub well_distributed: bool,
}

fn rel(obs: f64, pred: f64) -> f64 {
    if pred == 0.0 {
        if obs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (obs - pred).abs() / pred
    }
}

/// Relative deviation of each recorded statistic from its center, over the
/// steps `i ≤ (1 − n^{−c})·n/k`.
pub fn trajectory_deviation(
    plan: &GreedyPlan<'_>,
    traj: &GreedyTrajectory,
) -> Result<DeviationReport> {
    if traj.digest != plan.digest {
        return invalid("trajectory was recorded on a different graph");
    }
    if traj
        .records
        .iter()
        .any(|r| r.degrees.len() != plan.tracked.len())
    {
        return invalid("trajectory tracks a different list of sets");
    }
    let g = plan.g;
    let horizon = plan.cfg.horizon(g.n(), g.k());
    let mut dead = vec![false; g.n()];
    let mut steps = Vec::new();
    for r in &traj.records {
        if let Some(e) = r.chosen_edge {
            if e >= g.num_edges() {
                return invalid(format!("edge id {e} out of range"));
            }
            for &v in g.edge(e) {
                dead[v] = true;
            }
        }
        if r.i as f64 > horizon {
            break;
        }
        let pred = plan.predicted(r.i);
        let degree = plan
            .tracked
            .iter()
            .enumerate()
            .filter(|(_, s)| s.iter().all(|&v| !dead[v]))
            .map(|(sid, _)| rel(r.degrees[sid] as f64, pred.degrees[sid]))
            .fold(0.0, f64::max);
        steps.push(StepDeviation {
            i: r.i,
            weight: rel(r.residual_weight, pred.weight),
            entropy: rel(r.residual_entropy, pred.entropy),
            degree,
        });
    }
    let max = |f: fn(&StepDeviation) -> f64| steps.iter().map(f).fold(0.0, f64::max);
    let wdf = well_distributed_factor(g, plan.x);
    Ok(DeviationReport {
        max_weight: max(|s| s.weight),
        max_entropy: max(|s| s.entropy),
        max_degree: max(|s| s.degree),
        steps,
        horizon,
        reached_horizon: traj.chosen.len() as f64 > horizon || traj.chosen.len() == g.n() / g.k(),
        well_distributed_factor: wdf,
        well_distributed: wdf <= (g.n() as f64).powf(plan.cfg.c),
    })
}

/// Extends disjoint `partial` edges to a perfect matching using the first
/// completion in edge-id order.
pub fn complete_to_pm(g: &Hypergraph, partial: &[usize]) -> Result<Option<Vec<usize>>> {
    let mut counter = PmCounter::new(g)?;
    complete_with(g, &mut counter, partial)
}

fn complete_with(
    g: &Hypergraph,
    counter: &mut PmCounter,
    partial: &[usize],
) -> Result<Option<Vec<usize>>> {
    let mut used = 0u64;
    for &id in partial {
        if id >= g.num_edges() {
            return invalid(format!("edge id {id} out of range"));
        }
        let m = mask_of(g.edge(id));
        if used & m != 0 {
            return invalid(format!(
                "partial matching edge {id} overlaps an earlier edge"
            ));
        }
        used |= m;
    }
    let rest = counter.full_mask() & !used;
    Ok(counter.first_completion(rest)?.map(|tail| {
        let mut out = partial.to_vec();
        out.extend(tail);
        out
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedySample {
    /// Greedy edges in order, then the completion.
    pub matching: Vec<usize>,
    pub greedy_steps: usize,
    /// `ln(x[e(i)] / W(i−1))` for each greedy step.
    pub log_probs: Vec<f64>,
    /// `a(i)/W(i) + ln W(i)` for each state `i` before a greedy step: the
    /// entropy of the next choice.
    pub step_entropies: Vec<f64>,
    pub restarts: usize,
    pub seed_used: u64,
}

/// Greedy prefix up to the stop rule, then an exact completion; on a dead
/// end, restart `r` uses `derive_seed(seed, r)`.
pub fn sample_pm_via_greedy(
    g: &Hypergraph,
    x: &EdgeWeights,
    cfg: &TrajectoryConfig,
    seed: u64,
    max_restarts: usize,
) -> Result<GreedySample> {
    if !is_fractional_pm(g, x.weights(), 1e-6)?.ok {
        return invalid("greedy sampling needs a fractional perfect matching");
    }
    let plan = GreedyPlan::new(g, x, cfg)?;
    let mut counter = PmCounter::new(g)?;
    for r in 0..=max_restarts {
        let s = if r == 0 {
            seed
        } else {
            derive_seed(seed, r as u64)
        };
        let traj = plan.run(s);
        let Some(matching) = complete_with(g, &mut counter, &traj.chosen)? else {
            continue;
        };
        let log_probs = traj
            .records
            .windows(2)
            .map(|w| {
                let id = w[1].chosen_edge.expect("recorded step");
                (x.weights()[id] / w[0].residual_weight).ln()
            })
            .collect();
        let step_entropies = traj.records[..traj.chosen.len()]
            .iter()
            .map(|r| r.residual_entropy / r.residual_weight + r.residual_weight.ln())
            .collect();
        return Ok(GreedySample {
            matching,
            greedy_steps: traj.chosen.len(),
            log_probs,
            step_entropies,
            restarts: r,
            seed_used: s,
        });
    }
    Err(Error::Sampling(format!(
        "no completable greedy prefix after {max_restarts} restarts"
    )))
}

/// The two printed forms of the per-step entropy at state `i`:
/// `A = h/(n/k) + k ln(n/k) + ln p(i)` and `B = h/(n/k) + ln(n/k) + k ln p(i)`.
pub fn per_step_entropy_candidates(h: f64, n: usize, k: usize, i: usize) -> (f64, f64) {
    let m = n as f64 / k as f64;
    let kf = k as f64;
    let lp = p_of(n, k, i).ln();
    (h / m + kf * m.ln() + lp, h / m + m.ln() + kf * lp)
}
