use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use hyperpm::bipartite::lower_bound_report;
use hyperpm::counting::{count_pm, pm_marginals};
use hyperpm::entropy::{
    jensen_bounds, max_entropy_fpm_with, well_distributed_factor, SolverOptions, SolverReport,
};
use hyperpm::greedy::{
    per_step_entropy_candidates, trajectory_deviation, DeviationReport, GreedyPlan,
    GreedyTrajectory, StopReason, StopRule, TrajectoryConfig,
};
use hyperpm::hypergraph::{dirac_threshold, gen_random_dirac};
use hyperpm::io::{read_hypergraph, read_weights};
use hyperpm::rng::derive_seed;
use hyperpm::shifting::{anneal_and_shift, well_distributed_fpm, AnnealParams, AnnealStop};
use hyperpm::{AlphaTable, DiracParams, EdgeWeights, Error, Hypergraph};

use crate::provenance::{verify_dir, InputDigest, OutputDir, RunConfig};
use crate::{
    acceptance, AnnealArgs, BoundArgs, Cli, Command, DegreesArgs, EntropyArgs, GenArgs, GraphArgs,
    GreedyArgs, Outcome, StopArg, VerifyArgs,
};

/// Runs one parsed command line on a pool of `cli.jobs` threads.
pub fn dispatch(cli: Cli) -> Result<Outcome> {
    if cli.jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()).into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("building thread pool")?;
    pool.install(|| run(&cli))
}

struct Ctx<'a> {
    cli: &'a Cli,
    alpha: AlphaTable,
    inputs: Vec<InputDigest>,
}

impl<'a> Ctx<'a> {
    fn new(cli: &'a Cli) -> Result<Self> {
        let mut inputs = Vec::new();
        let alpha = match &cli.alpha_table {
            Some(path) => {
                inputs.push(InputDigest::file("alpha-table", path)?);
                AlphaTable::parse(
                    &std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?,
                )?
            }
            None => AlphaTable::default(),
        };
        Ok(Self { cli, alpha, inputs })
    }

    fn graph(&mut self, path: &Path) -> Result<Hypergraph> {
        let g = read_hypergraph(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputDigest::graph("graph", path, &g));
        Ok(g)
    }

    fn weights(
        &mut self,
        role: &str,
        g: &Hypergraph,
        path: &Path,
        tol: f64,
    ) -> Result<EdgeWeights> {
        let w = read_weights(g, path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputDigest::file(role, path)?);
        Ok(EdgeWeights::verified(g, w, tol)?)
    }

    fn output(self) -> Result<OutputDir> {
        OutputDir::create(RunConfig {
            version: env!("CARGO_PKG_VERSION").into(),
            command: serde_json::to_value(&self.cli.command)?,
            jobs: self.cli.jobs,
            out: self.cli.out.display().to_string(),
            alpha_table: self
                .cli
                .alpha_table
                .as_ref()
                .map(|p| p.display().to_string()),
            inputs: self.inputs,
        })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1e-2) {
        return Err(
            Error::InvalidArgument(format!("--tol must lie in (0, 1e-2), got {tol}")).into(),
        );
    }
    Ok(())
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::InvalidArgument(format!("{what} is randomized; pass --seed")).into())
}

fn ok(summary: serde_json::Value) -> Result<Outcome> {
    Ok(Outcome {
        summary,
        passed: true,
    })
}

fn run(cli: &Cli) -> Result<Outcome> {
    let ctx = Ctx::new(cli)?;
    match &cli.command {
        Command::Gen(a) => gen(ctx, a),
        Command::Degrees(a) => degrees(ctx, a),
        Command::Entropy(a) => entropy(ctx, a),
        Command::Anneal(a) => anneal(ctx, a),
        Command::Greedy(a) => greedy(ctx, a),
        Command::Count(a) => count(ctx, a),
        Command::Marginals(a) => marginals(ctx, a),
        Command::Bound(a) => bound(ctx, a),
        Command::Verify(a) => verify(ctx, a),
    }
}

fn gen(ctx: Ctx, a: &GenArgs) -> Result<Outcome> {
    let graphs: Vec<(String, Hypergraph)> = if a.complete {
        vec![(
            format!("complete_n{}_k{}.khg", a.n, a.k),
            Hypergraph::complete(a.n, a.k)?,
        )]
    } else {
        let seed = require_seed(a.seed, "random generation")?;
        let params = DiracParams::new(a.d, a.gamma)?;
        (0..a.count)
            .into_par_iter()
            .map(|i| {
                let g = gen_random_dirac(
                    a.n,
                    a.k,
                    &params,
                    a.density,
                    derive_seed(seed, i as u64),
                    &ctx.alpha,
                    a.max_attempts,
                )?;
                Ok((format!("dirac_n{}_k{}_{i:03}.khg", a.n, a.k), g))
            })
            .collect::<Result<_>>()?
    };
    let mut out = ctx.output()?;
    let mut files = Vec::new();
    for (name, g) in &graphs {
        out.write_graph(name, g)?;
        files.push(json!({ "file": name, "digest": g.digest(), "edges": g.num_edges() }));
    }
    let v = out.write_json("gen.json", &json!({ "n": a.n, "k": a.k, "graphs": files }))?;
    ok(v)
}

fn degrees(ctx: Ctx, a: &DegreesArgs) -> Result<Outcome> {
    let mut ctx = ctx;
    let g = ctx.graph(&a.graph)?;
    let profile = g.degree_ratio_profile()?;
    let min_degrees = (0..g.k())
        .map(|d| g.min_d_degree(d))
        .collect::<hyperpm::Result<Vec<_>>>()?;
    let mut report = json!({
        "n": g.n(),
        "k": g.k(),
        "edges": g.num_edges(),
        "digest": g.digest(),
        "min_degrees": min_degrees,
        "ratios": profile.iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect::<Vec<_>>(),
        "ratio_values": profile.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect::<Vec<_>>(),
    });
    if let (Some(d), Some(gamma)) = (a.d, a.gamma) {
        let params = DiracParams::new(d, gamma)?;
        let alpha = ctx.alpha.get(d, g.k())?;
        report["dirac"] = json!(g.is_dirac(&params, &ctx.alpha)?);
        report["threshold"] = json!(dirac_threshold(g.n(), g.k(), &params, alpha));
        report["alpha"] = json!(format!("{}/{}", alpha.numer(), alpha.denom()));
    }
    let v = ctx.output()?.write_json("degrees.json", &report)?;
    ok(v)
}

#[derive(Serialize)]
struct EntropyReport {
    h: f64,
    converged: bool,
    jensen_upper: f64,
    jensen_lower: f64,
    max_weight: f64,
    min_weight: f64,
    well_distributed_factor: f64,
    solver: SolverReport,
}

fn solve(g: &Hypergraph, tol: f64, max_iter: usize) -> Result<(EdgeWeights, SolverReport)> {
    let opts = SolverOptions {
        tol,
        max_iter,
        ..SolverOptions::default()
    };
    Ok(max_entropy_fpm_with(g, &opts)?)
}

fn entropy(ctx: Ctx, a: &EntropyArgs) -> Result<Outcome> {
    check_tol(a.tol)?;
    let mut ctx = ctx;
    let g = ctx.graph(&a.graph)?;
    let (x, rep) = solve(&g, a.tol, a.max_iter)?;
    let (upper, lower) = jensen_bounds(&g, x.max_weight());
    let report = EntropyReport {
        h: rep.entropy,
        converged: rep.converged,
        jensen_upper: upper,
        jensen_lower: lower,
        max_weight: x.max_weight(),
        min_weight: x.min_weight(),
        well_distributed_factor: well_distributed_factor(&g, x.weights()),
        solver: rep,
    };
    let mut out = ctx.output()?;
    out.write_weights("entropy.wts", &g, x.weights())?;
    let v = out.write_json("entropy.json", &report)?;
    Ok(Outcome {
        passed: report.converged,
        summary: v,
    })
}

fn anneal(ctx: Ctx, a: &AnnealArgs) -> Result<Outcome> {
    check_tol(a.tol)?;
    let mut ctx = ctx;
    let g = ctx.graph(&a.graph)?;
    let x_star = match &a.weights {
        Some(p) => ctx.weights("weights", &g, p, a.tol)?,
        None => {
            let (x, rep) = solve(&g, 1e-10, 200_000)?;
            if !rep.converged {
                return Err(Error::Infeasible("max-entropy solve did not converge".into()).into());
            }
            x
        }
    };
    let params = DiracParams::new(a.d, a.gamma)?;
    let (x_hat, hat_info) = match &a.hat_weights {
        Some(p) => (ctx.weights("hat-weights", &g, p, a.tol)?, json!(null)),
        None => {
            let seed = require_seed(a.seed, "the Monte Carlo hat matching")?;
            let rep = well_distributed_fpm(&g, &params, seed, a.trials)?;
            let info = json!({
                "trials": rep.trials,
                "retries": rep.retries,
                "greedy_rounds": rep.greedy_rounds,
                "zero_hit_edges": rep.zero_hit_edges,
            });
            (rep.weights, info)
        }
    };
    let c = match a.c {
        Some(c) => c,
        None => {
            let c = well_distributed_factor(&g, x_hat.weights());
            if !c.is_finite() {
                return Err(Error::InvalidArgument(
                    "hat matching has zero-weight edges; raise --trials or pass --c".into(),
                )
                .into());
            }
            c
        }
    };
    let p = match a.epsilon {
        Some(eps) => AnnealParams::new(&g, a.gamma, eps, c, a.max_steps)?,
        None => AnnealParams::auto(&g, a.gamma, c, a.max_steps)?,
    };
    let r = anneal_and_shift(&g, &x_star, &x_hat, &p)?;
    let mut out = ctx.output()?;
    out.write_weights("anneal.wts", &g, r.weights.weights())?;
    let mut csv = out.csv("anneal_trace.csv")?;
    csv.write_record([
        "step",
        "e1",
        "f1",
        "delta",
        "entropy_before",
        "entropy_after",
        "bound",
    ])?;
    for s in &r.steps {
        csv.serialize((
            s.step,
            s.e_ids[0],
            s.f_ids[0],
            s.delta,
            s.entropy_before,
            s.entropy_after,
            s.bound,
        ))?;
    }
    csv.flush()?;
    let monotone = r
        .steps
        .iter()
        .all(|s| s.entropy_after >= s.entropy_before - 1e-12);
    let report = json!({
        "params": p,
        "hat": hat_info,
        "stop": r.stop,
        "steps": r.steps.len(),
        "step_budget": r.step_budget(g.n(), &p),
        "x0_entropy": r.x0_entropy,
        "final_entropy": r.weights.entropy(),
        "min_weight": r.min_weight,
        "well_distributed_factor": r.well_distributed_factor,
        "well_distributed": r.well_distributed_factor <= p.d,
        "search_exhausted": r.stop == AnnealStop::SearchExhausted,
        "renormalizations": r.renormalizations,
        "max_drift": r.max_drift,
        "monotone": monotone,
    });
    let v = out.write_json("anneal.json", &report)?;
    Ok(Outcome {
        passed: monotone && r.min_weight >= p.delta * (1.0 - 1e-9),
        summary: v,
    })
}

fn greedy_config(a: &GreedyArgs) -> TrajectoryConfig {
    let stop = match (a.max_steps, a.stop) {
        (Some(s), _) => StopRule::MaxSteps(s),
        (None, StopArg::Fraction) => StopRule::Fraction,
        (None, StopArg::Freeze) => StopRule::UntilFreeze,
    };
    TrajectoryConfig {
        c: a.c,
        stop,
        sets_per_size: a.sets_per_size,
        tracked_seed: derive_seed(a.seed, u64::MAX),
        tracked: None,
    }
}

fn write_trajectory(
    out: &mut OutputDir,
    name: &str,
    g: &Hypergraph,
    plan: &GreedyPlan<'_>,
    t: &GreedyTrajectory,
) -> Result<()> {
    let mut csv = out.csv(name)?;
    csv.write_record([
        "i",
        "chosen_edge",
        "residual_weight",
        "predicted_weight",
        "residual_entropy",
        "predicted_entropy",
        "alive_vertices",
        "max_degree_deviation",
    ])?;
    let mut dead = vec![false; g.n()];
    for r in &t.records {
        if let Some(e) = r.chosen_edge {
            for &v in g.edge(e) {
                dead[v] = true;
            }
        }
        let pred = plan.predicted(r.i);
        let dev = plan
            .tracked()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.iter().all(|&v| !dead[v]))
            .filter(|(sid, _)| pred.degrees[*sid] > 0.0)
            .map(|(sid, _)| (r.degrees[sid] as f64 - pred.degrees[sid]).abs() / pred.degrees[sid])
            .fold(0.0, f64::max);
        csv.serialize((
            r.i,
            r.chosen_edge.map(|e| e as i64).unwrap_or(-1),
            r.residual_weight,
            pred.weight,
            r.residual_entropy,
            pred.entropy,
            r.alive_vertices,
            dev,
        ))?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    seed: u64,
    steps: usize,
    stop: StopReason,
    freeze_step: Option<usize>,
    deviation_max_weight: f64,
    deviation_max_entropy: f64,
    deviation_max_degree: f64,
    reached_horizon: bool,
}

fn greedy(ctx: Ctx, a: &GreedyArgs) -> Result<Outcome> {
    check_tol(a.tol)?;
    let mut ctx = ctx;
    let g = ctx.graph(&a.graph)?;
    let x = match &a.weights {
        Some(p) => ctx.weights("weights", &g, p, a.tol)?,
        None => solve(&g, 1e-10, 200_000)?.0,
    };
    let cfg = greedy_config(a);
    let plan = GreedyPlan::new(&g, &x, &cfg)?;
    let seeds: Vec<u64> = (0..a.trials as u64)
        .map(|r| derive_seed(a.seed, r))
        .collect();
    let runs = plan.run_many(&seeds);
    let devs: Vec<DeviationReport> = runs
        .iter()
        .map(|t| trajectory_deviation(&plan, t))
        .collect::<hyperpm::Result<_>>()?;

    let mut out = ctx.output()?;
    for (r, t) in runs.iter().enumerate() {
        write_trajectory(&mut out, &format!("trajectory_{r:03}.csv"), &g, &plan, t)?;
    }
    let horizon = cfg.horizon(g.n(), g.k());
    let mut csv = out.csv("step_entropy.csv")?;
    csv.write_record(["i", "empirical_mean", "candidate_a", "candidate_b", "runs"])?;
    let (mut err_a, mut err_b) = (0.0f64, 0.0f64);
    let mut i = 0;
    loop {
        let emp: Vec<f64> = runs
            .iter()
            .filter(|t| t.chosen.len() > i)
            .map(|t| {
                let r = &t.records[i];
                r.residual_entropy / r.residual_weight + r.residual_weight.ln()
            })
            .collect();
        if emp.is_empty() || i as f64 > horizon {
            break;
        }
        let mean = emp.iter().sum::<f64>() / emp.len() as f64;
        let (ca, cb) = per_step_entropy_candidates(x.entropy(), g.n(), g.k(), i);
        err_a = err_a.max((mean - ca).abs());
        err_b = err_b.max((mean - cb).abs());
        csv.serialize((i, mean, ca, cb, emp.len()))?;
        i += 1;
    }
    csv.flush()?;
    let summaries: Vec<RunSummary> = runs
        .iter()
        .zip(&devs)
        .enumerate()
        .map(|(r, (t, d))| RunSummary {
            run: r,
            seed: t.seed,
            steps: t.chosen.len(),
            stop: t.stop,
            freeze_step: t.freeze_step(),
            deviation_max_weight: d.max_weight,
            deviation_max_entropy: d.max_entropy,
            deviation_max_degree: d.max_degree,
            reached_horizon: d.reached_horizon,
        })
        .collect();
    let report = json!({
        "config": cfg,
        "horizon": horizon,
        "tracked_sets": plan.tracked().len(),
        "entropy": x.entropy(),
        "well_distributed_factor": devs.first().map(|d| d.well_distributed_factor),
        "well_distributed": devs.first().map(|d| d.well_distributed),
        "step_entropy_max_error": { "candidate_a": err_a, "candidate_b": err_b },
        "step_entropy_closer": if err_b <= err_a { "b" } else { "a" },
        "runs": summaries,
    });
    let v = out.write_json("greedy.json", &report)?;
    ok(v)
}

fn count(ctx: Ctx, a: &GraphArgs) -> Result<Outcome> {
    let mut ctx = ctx;
    let g = ctx.graph(&a.graph)?;
    let c = count_pm(&g)?;
    let v = ctx.output()?.write_json("count.json", &c)?;
    ok(v)
}

fn marginals(ctx: Ctx, a: &GraphArgs) -> Result<Outcome> {
    let mut ctx = ctx;
    let g = ctx.graph(&a.graph)?;
    let m = pm_marginals(&g)?;
    let ln_phi = hyperpm::combin::ln_big(&m.total);
    let h = m.weights.entropy();
    let bound_holds = g.k() as f64 * h >= ln_phi - 1e-9;
    let mut out = ctx.output()?;
    out.write_weights("marginals.wts", &g, m.weights.weights())?;
    let v = out.write_json(
        "marginals.json",
        &json!({
            "total": m.total.to_string(),
            "ln_phi": ln_phi,
            "entropy": h,
            "k_entropy": g.k() as f64 * h,
            "bound_holds": bound_holds,
            "exact_sums": m.exact_sums,
        }),
    )?;
    Ok(Outcome {
        passed: bound_holds && m.exact_sums,
        summary: v,
    })
}

fn bound(ctx: Ctx, a: &BoundArgs) -> Result<Outcome> {
    let mut ctx = ctx;
    let g = ctx.graph(&a.graph)?;
    let params = DiracParams::new(a.d, a.gamma)?;
    let r = lower_bound_report(&g, &params)?;
    let passed = r.chain.holds && r.h_solver >= r.bound - 1e-6;
    let v = ctx.output()?.write_json("bound.json", &r)?;
    Ok(Outcome { passed, summary: v })
}

fn verify(ctx: Ctx, a: &VerifyArgs) -> Result<Outcome> {
    if a.suite.is_none() && a.dir.is_none() {
        return Err(Error::InvalidArgument("pass --suite acceptance or --dir DIR".into()).into());
    }
    let mut summary = json!({});
    let mut passed = true;
    if let Some(dir) = &a.dir {
        let checks = verify_dir(dir)?;
        passed &= checks.iter().all(|c| c.ok);
        summary["dir"] = json!(checks);
    }
    if a.suite.is_some() {
        let results = acceptance::run_selected(&a.only, |r| println!("{}", r.line()));
        passed &= results.iter().all(|r| r.passed);
        summary["acceptance"] = json!(results);
    }
    summary["passed"] = json!(passed);
    let v = ctx.output()?.write_json("verify.json", &summary)?;
    Ok(Outcome { summary: v, passed })
}
