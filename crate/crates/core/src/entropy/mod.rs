//! Fractional perfect matchings and their entropy.

mod solver;

pub use solver::{
    max_entropy_fpm, max_entropy_fpm_with, scale_to_feasible, vertex_system, ScalingOutcome,
    ScalingSystem, SolverOptions, SolverReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hypergraph::Hypergraph;

/// Default feasibility tolerance (max vertex residual).
pub const FEAS_TOL: f64 = 1e-8;

/// Weights below this count as exactly zero in entropy sums.
pub const ZERO_WEIGHT: f64 = 1e-300;

/// `x ln(1/x)` with `0 ln 0 = 0`.
pub fn plogp(x: f64) -> f64 {
    if x < ZERO_WEIGHT {
        0.0
    } else {
        -x * x.ln()
    }
}

/// `Σ x ln(1/x)` in nats. Fails on negative or non-finite weights.
pub fn entropy(w: &[f64]) -> Result<f64> {
    if let Some((i, x)) = w
        .iter()
        .enumerate()
        .find(|(_, x)| !(**x >= 0.0) || !x.is_finite())
    {
        return invalid(format!(
            "weight {i} is {x}, must be a nonnegative finite number"
        ));
    }
    Ok(w.iter().map(|&x| plogp(x)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Raw,
    VerifiedFpm,
}

/// Weights aligned with a graph's edge ids, with cached entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    w: Vec<f64>,
    h: f64,
    status: Status,
}

impl EdgeWeights {
    /// Unverified weights; each must lie in `[0, 1]` (up to `1e-9` above 1).
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let h = entropy(&w)?;
        if let Some((i, x)) = w.iter().enumerate().find(|(_, x)| **x > 1.0 + 1e-9) {
            return invalid(format!("weight {i} is {x} > 1"));
        }
        Ok(Self {
            w,
            h,
            status: Status::Raw,
        })
    }

    /// Weights checked to be a fractional perfect matching of `g` within `tol`.
    pub fn verified(g: &Hypergraph, w: Vec<f64>, tol: f64) -> Result<Self> {
        Self::new(w)?.verify(g, tol)
    }

    pub fn verify(mut self, g: &Hypergraph, tol: f64) -> Result<Self> {
        let check = is_fractional_pm(g, &self.w, tol)?;
        if !check.ok {
            return Err(Error::Infeasible(format!(
                "vertex {} has incident weight off by {:.3e} (tolerance {tol:.1e})",
                check.worst_vertex, check.worst_residual
            )));
        }
        self.status = Status::VerifiedFpm;
        Ok(self)
    }

    pub(crate) fn into_verified_unchecked(mut self) -> Self {
        self.status = Status::VerifiedFpm;
        self
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.w
    }

    pub fn entropy(&self) -> f64 {
        self.h
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_verified(&self) -> bool {
        self.status == Status::VerifiedFpm
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Sum of incident weight at every vertex.
pub fn vertex_sums(g: &Hypergraph, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != g.num_edges() {
        return invalid(format!("{} weights for {} edges", w.len(), g.num_edges()));
    }
    Ok((0..g.n())
        .map(|v| g.incident(v).iter().map(|&id| w[id]).sum())
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpmCheck {
    pub ok: bool,
    pub worst_vertex: usize,
    pub worst_residual: f64,
}

pub fn is_fractional_pm(g: &Hypergraph, w: &[f64], tol: f64) -> Result<FpmCheck> {
    let sums = vertex_sums(g, w)?;
    let (worst_vertex, worst_residual) =
        sums.iter()
            .map(|s| (s - 1.0).abs())
            .enumerate()
            .fold((0, 0.0), |best, (v, r)| {
                if r > best.1 || r.is_nan() {
                    (v, r)
                } else {
                    best
                }
            });
    let nonneg = w.iter().all(|&x| x >= 0.0);
    Ok(FpmCheck {
        ok: nonneg && worst_residual <= tol,
        worst_vertex,
        worst_residual,
    })
}

/// Least `D ≥ 1` with `1/(D n^{k−1}) ≤ x[e] ≤ D/n^{k−1}` for every edge;
/// infinity if some weight is zero.
pub fn well_distributed_factor(g: &Hypergraph, w: &[f64]) -> f64 {
    let scale = (g.n() as f64).powi(g.k() as i32 - 1);
    w.iter().fold(1.0_f64, |acc, &x| {
        if x <= 0.0 {
            f64::INFINITY
        } else {
            acc.max(x * scale).max(1.0 / (x * scale))
        }
    })
}

/// `(upper, lower) = ((1−1/k) n ln n, (n/k) ln(n / (L² k |E|)))`.
pub fn jensen_bounds(g: &Hypergraph, max_weight: f64) -> (f64, f64) {
    let n = g.n() as f64;
    let k = g.k() as f64;
    let upper = (1.0 - 1.0 / k) * n * n.ln();
    let lower = (n / k) * (n / (max_weight * max_weight * k * g.num_edges() as f64)).ln();
    (upper, lower)
}

/// `(1−t) x1 + t x2` for two verified fractional perfect matchings.
pub fn convex_combine(x1: &EdgeWeights, x2: &EdgeWeights, t: f64) -> Result<EdgeWeights> {
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("t = {t} outside [0, 1]"));
    }
    if x1.len() != x2.len() {
        return invalid(format!(
            "weight vectors of length {} and {}",
            x1.len(),
            x2.len()
        ));
    }
    if !x1.is_verified() || !x2.is_verified() {
        return invalid("convex_combine needs verified fractional perfect matchings");
    }
    let w =
        x1.w.iter()
            .zip(&x2.w)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
    let mut out = EdgeWeights::new(w)?;
    out.status = Status::VerifiedFpm;
    Ok(out)
}
