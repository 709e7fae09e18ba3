//! Maximum-entropy fractional perfect matchings by iterative proportional
//! scaling.
//!
//! The optimum of `max Σ x ln(1/x)` subject to unit vertex sums has the form
//! `x_e = exp(Σ_{v∈e} λ_v − 1)`. Cycling through the vertices and rescaling the
//! incident weights so that the vertex sum becomes 1 is exact coordinate
//! ascent on the dual in `λ`.

use serde::{Deserialize, Serialize};

use super::{plogp, EdgeWeights, FEAS_TOL};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// Linear constraints `Σ_j a_cj y_j = 1` over nonnegative variables.
///
/// Scaling multiplies every variable of a constraint by the same factor, so
/// it solves the entropy program only when, within each constraint, the
/// coefficient divided by the variable's entropy weight is constant. Both the
/// hypergraph system (all ones) and the quotient bipartite system satisfy
/// this.
#[derive(Clone, Debug)]
pub struct ScalingSystem {
    pub num_vars: usize,
    pub constraints: Vec<Vec<(usize, f64)>>,
}

impl ScalingSystem {
    fn var_index(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.num_vars];
        for (c, row) in self.constraints.iter().enumerate() {
            for &(j, _) in row {
                idx[j].push(c);
            }
        }
        idx
    }

    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * y[j]).sum::<f64>() - 1.0)
            .collect()
    }

    pub fn max_residual(&self, y: &[f64]) -> f64 {
        self.residuals(y).iter().fold(0.0, |m, r| {
            if r.abs() > m || r.is_nan() {
                r.abs()
            } else {
                m
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Sweeps between stall checks.
    pub stall_window: usize,
    /// Minimum relative residual decrease over a window.
    pub stall_ratio: f64,
    /// Damped parallel sweeps run after a stall.
    pub damped_sweeps: usize,
    /// Largest admissible `|λ|`; `None` means `1e3·ln(#constraints)`.
    pub potential_limit: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: FEAS_TOL,
            max_iter: 100_000,
            stall_window: 100,
            stall_ratio: 1e-3,
            damped_sweeps: 100,
            potential_limit: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalingOutcome {
    pub values: Vec<f64>,
    pub potentials: Vec<f64>,
    pub iterations: usize,
    pub max_residual: f64,
    pub converged: bool,
    pub fallback_sweeps: usize,
}

/// Scales `y_j = base_j · exp(Σ_{c∋j} φ_c)` until every constraint holds
/// within `opts.tol`, starting from potentials `phi0`.
///
/// A constraint whose current sum is zero or not finite, or a potential
/// beyond the limit, is reported as infeasible.
pub fn scale_to_feasible(
    sys: &ScalingSystem,
    base: &[f64],
    phi0: &[f64],
    opts: &SolverOptions,
) -> Result<ScalingOutcome> {
    assert_eq!(base.len(), sys.num_vars);
    assert_eq!(phi0.len(), sys.constraints.len());
    let var_index = sys.var_index();
    let limit = opts
        .potential_limit
        .unwrap_or_else(|| 1e3 * (sys.constraints.len().max(3) as f64).ln());
    let multiplicity = var_index.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let theta = 1.0 / multiplicity as f64;

    let mut phi = phi0.to_vec();
    let recompute = |phi: &[f64], y: &mut Vec<f64>| {
        for (j, cs) in var_index.iter().enumerate() {
            y[j] = base[j] * cs.iter().map(|&c| phi[c]).sum::<f64>().exp();
        }
    };
    let mut y = vec![0.0; sys.num_vars];
    recompute(&phi, &mut y);

    let row_sum = |row: &[(usize, f64)], y: &[f64]| row.iter().map(|&(j, a)| a * y[j]).sum::<f64>();
    let bad_sum = |c: usize, s: f64| {
        Error::Infeasible(format!(
            "constraint {c} has incident weight {s}; no fractional perfect matching"
        ))
    };

    let mut history = Vec::new();
    let mut residual = sys.max_residual(&y);
    let mut damped_left = 0usize;
    let mut fallback_sweeps = 0usize;
    let mut next_stall_check = opts.stall_window;
    let mut sweeps = 0usize;
    history.push(residual);

    while residual > opts.tol && sweeps < opts.max_iter {
        if damped_left > 0 {
            let sums: Vec<f64> = sys.constraints.iter().map(|row| row_sum(row, &y)).collect();
            for (c, &s) in sums.iter().enumerate() {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(bad_sum(c, s));
                }
                phi[c] -= theta * s.ln();
            }
            recompute(&phi, &mut y);
            damped_left -= 1;
            fallback_sweeps += 1;
        } else {
            for (c, row) in sys.constraints.iter().enumerate() {
                let s = row_sum(row, &y);
                if !(s > 0.0) || !s.is_finite() {
                    return Err(bad_sum(c, s));
                }
                phi[c] -= s.ln();
                let inv = 1.0 / s;
                for &(j, _) in row {
                    y[j] *= inv;
                }
            }
            if sweeps % 64 == 63 {
                recompute(&phi, &mut y);
            }
        }
        sweeps += 1;
        if let Some((c, p)) = phi
            .iter()
            .enumerate()
            .find(|(_, p)| p.abs() > limit || !p.is_finite())
        {
            return Err(Error::Infeasible(format!(
                "dual potential {c} reached {p:.3e} (limit {limit:.3e}); no fractional perfect matching"
            )));
        }
        residual = sys.max_residual(&y);
        history.push(residual);
        if sweeps >= next_stall_check && damped_left == 0 {
            let old = history[sweeps - opts.stall_window];
            if old > 0.0 && (old - residual) / old < opts.stall_ratio {
                damped_left = opts.damped_sweeps;
            }
            next_stall_check = sweeps + opts.stall_window;
        }
    }

    Ok(ScalingOutcome {
        values: y,
        potentials: phi,
        iterations: sweeps,
        max_residual: residual,
        converged: residual <= opts.tol,
        fallback_sweeps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub max_residual: f64,
    pub entropy: f64,
    pub converged: bool,
    pub fallback_sweeps: usize,
    /// `λ_v` with `x_e = exp(Σ_{v∈e} λ_v − 1)`.
    pub potentials: Vec<f64>,
}

pub fn vertex_system(g: &Hypergraph) -> ScalingSystem {
    ScalingSystem {
        num_vars: g.num_edges(),
        constraints: (0..g.n())
            .map(|v| g.incident(v).iter().map(|&id| (id, 1.0)).collect())
            .collect(),
    }
}

pub fn max_entropy_fpm(
    g: &Hypergraph,
    tol: f64,
    max_iter: usize,
) -> Result<(EdgeWeights, SolverReport)> {
    max_entropy_fpm_with(
        g,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

/// Entropy-maximizing fractional perfect matching of `g`.
///
/// Starts from the uniform point `x_e = n/(k|E|)`. The result is verified
/// when the solve converged and raw otherwise.
pub fn max_entropy_fpm_with(
    g: &Hypergraph,
    opts: &SolverOptions,
) -> Result<(EdgeWeights, SolverReport)> {
    if g.n() > 0 && g.num_edges() == 0 {
        return Err(Error::Infeasible("graph has no edges".into()));
    }
    if let Some(v) = (0..g.n()).find(|&v| g.incident(v).is_empty()) {
        return Err(Error::Infeasible(format!("vertex {v} is isolated")));
    }
    let sys = vertex_system(g);
    let x0 = g.n() as f64 / (g.k() as f64 * g.num_edges().max(1) as f64);
    let phi0 = vec![(1.0 + x0.ln()) / g.k() as f64; g.n()];
    let base = vec![(-1.0f64).exp(); g.num_edges()];
    let out = scale_to_feasible(&sys, &base, &phi0, opts)?;
    let w: Vec<f64> = out.values.iter().map(|&x| x.min(1.0)).collect();
    let entropy = w.iter().map(|&x| plogp(x)).sum();
    let report = SolverReport {
        iterations: out.iterations,
        max_residual: out.max_residual,
        entropy,
        converged: out.converged,
        fallback_sweeps: out.fallback_sweeps,
        potentials: out.potentials,
    };
    let weights = if out.converged {
        EdgeWeights::verified(g, w, opts.tol.max(out.max_residual))?
    } else {
        EdgeWeights::new(w)?
    };
    Ok((weights, report))
}
