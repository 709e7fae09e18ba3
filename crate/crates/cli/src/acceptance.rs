//! The acceptance suite: one pass/fail line per criterion.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use clap::Parser;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use hyperpm::bipartite::{bipartite_max_entropy, entropy_lower_bound, lift, pull_back};
use hyperpm::combin::{binomial_f64, ln_big};
use hyperpm::counting::{count_pm, phi_complete, pm_marginals, sample_uniform_pm};
use hyperpm::entropy::{
    convex_combine, jensen_bounds, max_entropy_fpm, vertex_sums, well_distributed_factor, FEAS_TOL,
};
use hyperpm::greedy::{p_of, GreedyPlan, StopRule, TrajectoryConfig};
use hyperpm::hypergraph::gen_random_dirac;
use hyperpm::rng::{derive_seed, seeded};
use hyperpm::shifting::{
    anneal_and_shift, apply_shift, find_shifting_structure, shift_gain_lower_bound, AnnealParams,
    AnnealStop,
};
use hyperpm::{AlphaTable, DiracParams, EdgeWeights, Hypergraph};

use crate::{dispatch, Cli};

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

const CRITERIA: [(u8, &str, Check); 10] = [
    (1, "exact-count oracle", exact_counts),
    (2, "max-entropy solver", solver_symmetry),
    (3, "jensen sandwich", jensen_sandwich),
    (4, "shift correctness", shift_correctness),
    (5, "anneal monotonicity", anneal_monotonicity),
    (6, "greedy concentration", greedy_concentration),
    (7, "marginal entropy", marginal_entropy),
    (8, "bipartite certificate", bipartite_certificate),
    (9, "residual trend", residual_trend),
    (10, "determinism", determinism),
];

pub fn run_all(report: impl FnMut(&Criterion)) -> Vec<Criterion> {
    run_selected(&[], report)
}

/// Runs the criteria in `ids` (all of them when empty), calling `report`
/// after each one.
pub fn run_selected(ids: &[u8], mut report: impl FnMut(&Criterion)) -> Vec<Criterion> {
    CRITERIA
        .iter()
        .filter(|(id, _, _)| ids.is_empty() || ids.contains(id))
        .map(|&(id, name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e:#}")),
            };
            let c = Criterion {
                id,
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            };
            report(&c);
            c
        })
        .collect()
}

const COMPLETE_SHAPES: [(usize, usize); 8] = [
    (4, 2),
    (6, 2),
    (8, 2),
    (10, 2),
    (6, 3),
    (9, 3),
    (12, 3),
    (8, 4),
];

fn exact_counts() -> Result<(bool, String)> {
    let start = Instant::now();
    let mut bad = Vec::new();
    for (n, k) in COMPLETE_SHAPES {
        let g = Hypergraph::complete(n, k)?;
        if count_pm(&g)?.value != phi_complete(n, k)? {
            bad.push(format!("({n},{k})"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        bad.is_empty() && secs < 10.0,
        format!(
            "{} shapes, mismatches {:?}, {secs:.2}s",
            COMPLETE_SHAPES.len(),
            bad
        ),
    ))
}

fn solver_symmetry() -> Result<(bool, String)> {
    let (mut worst_h, mut worst_r) = (0.0f64, 0.0f64);
    for (n, k) in COMPLETE_SHAPES {
        let g = Hypergraph::complete(n, k)?;
        let (_, rep) = max_entropy_fpm(&g, 1e-10, 200_000)?;
        let expected = (n / k) as f64 * binomial_f64(n - 1, k - 1).ln();
        worst_h = worst_h.max((rep.entropy - expected).abs());
        worst_r = worst_r.max(rep.max_residual);
    }
    Ok((
        worst_h <= 1e-6 && worst_r <= 1e-8,
        format!("max |h - (n/k) ln C(n-1,k-1)| = {worst_h:.2e}, max residual = {worst_r:.2e}"),
    ))
}

/// Random Dirac instances keyed by `(n, k, d)`.
fn dirac_family(
    shapes: &[(usize, usize, usize)],
    gamma: f64,
    density: f64,
    per_shape: u64,
    base_seed: u64,
) -> Result<Vec<Hypergraph>> {
    let alpha = AlphaTable::default();
    let jobs: Vec<(usize, usize, usize, u64)> = shapes
        .iter()
        .flat_map(|&(n, k, d)| (0..per_shape).map(move |s| (n, k, d, s)))
        .collect();
    jobs.par_iter()
        .map(|&(n, k, d, s)| {
            let params = DiracParams::new(d, gamma)?;
            let seed = derive_seed(base_seed, (n * 1000 + k * 10 + d) as u64 * 1000 + s);
            Ok(gen_random_dirac(
                n, k, &params, density, seed, &alpha, 2000,
            )?)
        })
        .collect()
}

fn jensen_sandwich() -> Result<(bool, String)> {
    let mut shapes: Vec<(usize, usize, usize)> = (6..=14).step_by(2).map(|n| (n, 2, 1)).collect();
    shapes.extend([6, 9, 12, 15].map(|n| (n, 3, 2)));
    let graphs = dirac_family(&shapes, 0.1, 0.85, 12, 3)?;
    let outcomes: Vec<(bool, bool)> = graphs
        .par_iter()
        .map(|g| {
            let (x, rep) = max_entropy_fpm(g, 1e-10, 200_000)?;
            let (upper, lower) = jensen_bounds(g, x.max_weight());
            let inside = rep.entropy >= lower - 1e-9 && rep.entropy <= upper + 1e-9;
            Ok((rep.converged, inside))
        })
        .collect::<Result<_>>()?;
    let unconverged = outcomes.iter().filter(|o| !o.0).count();
    let violations = outcomes.iter().filter(|o| !o.1).count();
    Ok((
        graphs.len() >= 100 && unconverged == 0 && violations == 0,
        format!(
            "{} instances, {violations} violations, {unconverged} unconverged",
            graphs.len()
        ),
    ))
}

fn partition_matching(g: &Hypergraph, rng: &mut impl Rng) -> Result<EdgeWeights> {
    let mut v: Vec<usize> = (0..g.n()).collect();
    v.shuffle(rng);
    let mut w = vec![0.0; g.num_edges()];
    for block in v.chunks(g.k()) {
        let mut b = block.to_vec();
        b.sort_unstable();
        let id = g.edge_id(&b).context("partition block is not an edge")?;
        w[id] = 1.0;
    }
    Ok(EdgeWeights::verified(g, w, FEAS_TOL)?)
}

fn shift_correctness() -> Result<(bool, String)> {
    let g = Hypergraph::complete(9, 3)?;
    let uniform = 1.0 / binomial_f64(g.n() - 1, g.k() - 1);
    let base = EdgeWeights::verified(&g, vec![uniform; g.num_edges()], 1e-12)?;
    let mut rng = seeded(4);
    let (mut checked, mut gain_fail, mut worst_drift) = (0, 0, 0.0f64);
    while checked < 1000 {
        let mut x = base.clone();
        for _ in 0..3 {
            let pm = partition_matching(&g, &mut rng)?;
            x = convex_combine(&x, &pm, rng.gen_range(0.0..0.5))?;
        }
        let e = rng.gen_range(0..g.num_edges());
        let f = rng.gen_range(0..g.num_edges());
        if g.edge(e).iter().filter(|v| g.edge(f).contains(v)).count() != 1 {
            continue;
        }
        let Some(s) = find_shifting_structure(&g, e, f, false)? else {
            continue;
        };
        let w = x.weights();
        let min_e = s
            .e_ids
            .iter()
            .map(|&id| w[id])
            .fold(f64::INFINITY, f64::min);
        let max_f = s.f_ids.iter().map(|&id| w[id]).fold(0.0, f64::max);
        let delta = rng.gen_range(0.0..=1.0) * min_e / 2.0;
        if delta <= 0.0 {
            continue;
        }
        let eta = max_f + delta + rng.gen_range(0.0..0.5);
        let bound = shift_gain_lower_bound(w, &s, delta, eta)?;
        let y = apply_shift(&x, &s, delta)?;
        if y.entropy() - x.entropy() < bound - 1e-9 {
            gain_fail += 1;
        }
        let before = vertex_sums(&g, w)?;
        let after = vertex_sums(&g, y.weights())?;
        for (a, b) in before.iter().zip(&after) {
            worst_drift = worst_drift.max((a - b).abs());
        }
        checked += 1;
    }
    Ok((
        gain_fail == 0 && worst_drift <= 1e-12,
        format!("{checked} shifts, {gain_fail} below bound, max vertex drift {worst_drift:.1e}"),
    ))
}

fn pm_mixture(g: &Hypergraph, seed: u64) -> Result<EdgeWeights> {
    let mut x: Option<EdgeWeights> = None;
    for j in 0..3u64 {
        let pm = sample_uniform_pm(g, derive_seed(seed, j))?;
        let mut w = vec![0.0; g.num_edges()];
        for id in pm {
            w[id] = 1.0;
        }
        let pm = EdgeWeights::verified(g, w, FEAS_TOL)?;
        x = Some(match x {
            None => pm,
            Some(prev) => convex_combine(&prev, &pm, 1.0 / (j + 1) as f64)?,
        });
    }
    Ok(x.expect("three matchings"))
}

struct AnnealOutcome {
    monotone: bool,
    floor: bool,
    well_distributed: bool,
    exhausted: bool,
}

fn anneal_instance(g: &Hypergraph, x_hat: &EdgeWeights, seed: u64) -> Result<AnnealOutcome> {
    let x_star = pm_mixture(g, seed)?;
    let c = well_distributed_factor(g, x_hat.weights());
    let p = AnnealParams::auto(g, 0.1, c, 200_000)?;
    let r = anneal_and_shift(g, &x_star, x_hat, &p)?;
    let mut monotone = r.weights.entropy() >= r.x0_entropy - 1e-12;
    let mut prev = r.x0_entropy;
    for s in &r.steps {
        monotone &= s.entropy_after >= s.entropy_before - 1e-12;
        monotone &= (s.entropy_before - prev).abs() < 1e-9;
        prev = s.entropy_after;
    }
    Ok(AnnealOutcome {
        monotone,
        floor: r.min_weight >= p.delta * (1.0 - 1e-9),
        well_distributed: r.well_distributed_factor <= p.d,
        exhausted: r.stop == AnnealStop::SearchExhausted,
    })
}

fn anneal_monotonicity() -> Result<(bool, String)> {
    let mut cases: Vec<(Hypergraph, EdgeWeights, u64)> = Vec::new();
    for n in [9, 12, 15] {
        let g = Hypergraph::complete(n, 3)?;
        let u = 1.0 / binomial_f64(n - 1, 2);
        let x_hat = EdgeWeights::verified(&g, vec![u; g.num_edges()], 1e-12)?;
        for s in 0..2 {
            cases.push((g.clone(), x_hat.clone(), s));
        }
    }
    let shapes = [(9, 3, 2), (12, 3, 2), (15, 3, 2)];
    let mut dirac = dirac_family(&shapes, 0.1, 0.9, 5, 5)?;
    dirac.truncate(14);
    for (i, g) in dirac.into_iter().enumerate() {
        let (x_hat, rep) = max_entropy_fpm(&g, 1e-10, 200_000)?;
        ensure!(rep.converged, "max-entropy solve did not converge");
        cases.push((g, x_hat, 100 + i as u64));
    }
    let outs: Vec<AnnealOutcome> = cases
        .par_iter()
        .map(|(g, x_hat, s)| anneal_instance(g, x_hat, *s))
        .collect::<Result<_>>()?;
    let total = outs.len();
    let monotone = outs.iter().filter(|o| o.monotone).count();
    let floor = outs.iter().filter(|o| o.floor).count();
    let contract = outs
        .iter()
        .filter(|o| o.well_distributed || o.exhausted)
        .count();
    let flagged = outs.iter().filter(|o| o.exhausted).count();
    Ok((
        total == 20 && monotone == total && floor == total && contract == total,
        format!(
            "{total} instances: monotone {monotone}, floor {floor}, wdf<=D or flagged {contract}, \
             search-exhausted rate {:.2}",
            flagged as f64 / total as f64
        ),
    ))
}

fn greedy_concentration() -> Result<(bool, String)> {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut all_ok = true;
    for n in [60usize, 90, 120] {
        let k = 3;
        let g = Hypergraph::complete(n, k)?;
        let u = 1.0 / binomial_f64(n - 1, k - 1);
        let x = EdgeWeights::verified(&g, vec![u; g.num_edges()], 1e-9)?;
        let steps = (0.8 * (n / k) as f64).ceil() as usize;
        let cfg = TrajectoryConfig {
            stop: StopRule::MaxSteps(steps),
            tracked: Some((0..n).step_by(n / 10).map(|v| vec![v]).collect()),
            ..TrajectoryConfig::default()
        };
        let plan = GreedyPlan::new(&g, &x, &cfg)?;
        let seeds: Vec<u64> = (0..200).map(|r| derive_seed(6, r)).collect();
        let runs = plan.run_many(&seeds);
        let (mut dw, mut dh, mut dd) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..=steps.min(n / k - 1) {
            let recs: Vec<_> = runs.iter().filter_map(|t| t.records.get(i)).collect();
            if recs.is_empty() {
                continue;
            }
            let pred = plan.predicted(i);
            let m = recs.len() as f64;
            let w = recs.iter().map(|r| r.residual_weight).sum::<f64>() / m;
            let h = recs.iter().map(|r| r.residual_entropy).sum::<f64>() / m;
            dw = dw.max((w - pred.weight).abs() / pred.weight);
            dh = dh.max((h - pred.entropy).abs() / pred.entropy);
            let p2 = p_of(n, k, i).powi(2);
            for (sid, set) in plan.tracked().iter().enumerate() {
                let alive: Vec<f64> = runs
                    .iter()
                    .filter(|t| {
                        t.records.len() > i
                            && !t.chosen[..i].iter().any(|&e| g.edge(e).contains(&set[0]))
                    })
                    .map(|t| t.records[i].degrees[sid] as f64)
                    .collect();
                if alive.is_empty() {
                    continue;
                }
                let mean = alive.iter().sum::<f64>() / alive.len() as f64;
                let target = p2 * plan.initial_degrees()[sid] as f64;
                dd = dd.max((mean - target).abs() / target);
            }
        }
        let ok = dw <= 0.10 && dh <= 0.10 && dd <= 0.15;
        all_ok &= ok;
        parts.push(format!(
            "n={n}: w {:.1}% h {:.1}% deg {:.1}%",
            100.0 * dw,
            100.0 * dh,
            100.0 * dd
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((all_ok && secs < 120.0, parts.join("; ")))
}

fn marginal_entropy() -> Result<(bool, String)> {
    let mut graphs: Vec<Hypergraph> = COMPLETE_SHAPES
        .iter()
        .filter(|(n, _)| *n <= 12)
        .map(|&(n, k)| Hypergraph::complete(n, k))
        .collect::<hyperpm::Result<_>>()?;
    let mut shapes: Vec<(usize, usize, usize)> = (6..=12).step_by(2).map(|n| (n, 2, 1)).collect();
    shapes.extend([(6, 3, 2), (9, 3, 2), (12, 3, 2)]);
    graphs.extend(dirac_family(&shapes, 0.1, 0.85, 4, 7)?);
    let results: Vec<(bool, bool)> = graphs
        .par_iter()
        .map(|g| {
            let m = pm_marginals(g)?;
            let h_marg = m.weights.entropy();
            let (_, rep) = max_entropy_fpm(g, 1e-10, 200_000)?;
            Ok((
                g.k() as f64 * h_marg >= ln_big(&m.total) - 1e-9,
                rep.converged && rep.entropy >= h_marg - 1e-6,
            ))
        })
        .collect::<Result<_>>()?;
    let count_fail = results.iter().filter(|r| !r.0).count();
    let solver_fail = results.iter().filter(|r| !r.1).count();
    Ok((
        count_fail == 0 && solver_fail == 0,
        format!(
            "{} instances, k*h < ln Phi: {count_fail}, solver below marginals: {solver_fail}",
            results.len()
        ),
    ))
}

fn bipartite_certificate() -> Result<(bool, String)> {
    let graphs = dirac_family(&[(9, 3, 2), (12, 3, 2)], 0.25, 0.97, 25, 8)?;
    let fails: Vec<String> = graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let bound = entropy_lower_bound(g, 2)?;
            let (_, solver) = max_entropy_fpm(g, 1e-10, 200_000)?;
            let l = lift(g, 2)?;
            let (y, _) = bipartite_max_entropy(&l)?;
            let pulled = pull_back(g, &l, &y, 1e-9)?;
            let mut why = Vec::new();
            if !(solver.converged && solver.entropy >= bound - 1e-6) {
                why.push("solver");
            }
            if !(pulled.is_verified() && pulled.entropy() >= bound - 1e-6) {
                why.push("pull-back");
            }
            Ok((!why.is_empty()).then(|| format!("#{i} {}", why.join("+"))))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let k6 = Hypergraph::complete(6, 3)?;
    let tight = entropy_lower_bound(&k6, 2)?;
    let gap = (tight - 2.0 * 10f64.ln()).abs();
    Ok((
        graphs.len() == 50 && fails.is_empty() && gap < 1e-9,
        format!(
            "{} instances, failures {:?}, K6 bound - 2 ln 10 = {gap:.1e}",
            graphs.len(),
            fails
        ),
    ))
}

/// `r(n)/n` with `r = ln Φ − (h − (1 − 1/k) n)`.
fn residual_per_n(g: &Hypergraph) -> Result<f64> {
    let n = g.n() as f64;
    let k = g.k() as f64;
    let ln_phi = ln_big(&count_pm(g)?.value);
    let (_, rep) = max_entropy_fpm(g, 1e-10, 200_000)?;
    ensure!(rep.converged, "solver did not converge on n = {}", g.n());
    Ok((ln_phi - (rep.entropy - (1.0 - 1.0 / k) * n)) / n)
}

fn residual_trend() -> Result<(bool, String)> {
    let ns = [6usize, 9, 12, 15, 18];
    let mut complete = Vec::new();
    let mut near = Vec::new();
    for n in ns {
        let g = Hypergraph::complete(n, 3)?;
        complete.push(residual_per_n(&g)?);
        let drop: Vec<usize> = (0..g.num_edges()).step_by(11).collect();
        let h = g.without_edges(&drop);
        near.push(match count_pm(&h) {
            Ok(c) if c.value > 0u32.into() => residual_per_n(&h).ok(),
            _ => None,
        });
    }
    let decreasing = complete.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let near_fmt: Vec<String> = near
        .iter()
        .map(|x| x.map_or("-".into(), |x| format!("{x:.4}")))
        .collect();
    Ok((
        decreasing,
        format!(
            "complete r/n [{}]; near-complete [{}]",
            fmt(&complete),
            near_fmt.join(", ")
        ),
    ))
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() {
            out.insert(
                path.file_name().unwrap().to_string_lossy().to_string(),
                fs::read(&path)?,
            );
        }
    }
    Ok(out)
}

fn run_twice(args: &[&str]) -> Result<(usize, Vec<String>)> {
    let mut snaps = Vec::new();
    for _ in 0..2 {
        let out = args[args.iter().position(|a| *a == "--out").unwrap() + 1];
        if Path::new(out).exists() {
            fs::remove_dir_all(out)?;
        }
        let cli = Cli::try_parse_from(std::iter::once("hyperpm").chain(args.iter().copied()))?;
        dispatch(cli)?;
        snaps.push(snapshot(Path::new(out))?);
    }
    let diff = snaps[0]
        .iter()
        .filter(|(name, bytes)| snaps[1].get(*name) != Some(bytes))
        .map(|(name, _)| name.clone())
        .chain(
            snaps[1]
                .keys()
                .filter(|k| !snaps[0].contains_key(*k))
                .cloned(),
        )
        .collect();
    Ok((snaps[0].len(), diff))
}

fn determinism() -> Result<(bool, String)> {
    let tmp = tempfile::tempdir()?;
    let root = tmp.path();
    let p = |s: &str| root.join(s).display().to_string();
    let (gen_out, anneal_out, greedy_out) = (p("gen"), p("anneal"), p("greedy"));
    let graph = p("k9.khg");
    hyperpm::io::write_hypergraph(&Hypergraph::complete(9, 3)?, &graph)?;
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "gen",
            vec![
                "gen", "--n", "9", "--k", "3", "--d", "2", "--seed", "1", "--count", "3", "--out",
                &gen_out, "--jobs", "2",
            ],
        ),
        (
            "anneal",
            vec![
                "anneal",
                "--graph",
                &graph,
                "--d",
                "2",
                "--seed",
                "2",
                "--trials",
                "200",
                "--epsilon",
                "0.8",
                "--out",
                &anneal_out,
            ],
        ),
        (
            "greedy",
            vec![
                "greedy",
                "--graph",
                &graph,
                "--seed",
                "3",
                "--trials",
                "8",
                "--stop",
                "freeze",
                "--out",
                &greedy_out,
                "--jobs",
                "2",
            ],
        ),
    ];
    let mut all = true;
    let mut parts = Vec::new();
    for (name, args) in runs {
        let (files, diff) = run_twice(&args)?;
        all &= diff.is_empty() && files > 1;
        parts.push(format!("{name}: {files} files, {} differ", diff.len()));
    }
    Ok((all, parts.join("; ")))
}
