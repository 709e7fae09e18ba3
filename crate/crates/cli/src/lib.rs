//! Experiment harness for `hyperpm`: one subcommand per library stage, with
//! seeded runs, file artifacts and provenance records.

pub mod acceptance;
pub mod commands;
pub mod provenance;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "hyperpm",
    version,
    about = "Perfect matchings in Dirac hypergraphs"
)]
pub struct Cli {
    /// Worker threads for independent seeds or instances.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Directory receiving artifacts and `run_config.json`.
    #[arg(long, global = true, default_value = "hyperpm-out")]
    pub out: PathBuf,

    /// Overrides for the Dirac threshold table (`d k alpha` per line).
    #[arg(long = "alpha-table", global = true)]
    pub alpha_table: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate complete or random Dirac hypergraphs as `.khg` files.
    Gen(GenArgs),
    /// Minimum d-degree profile and Dirac test.
    Degrees(DegreesArgs),
    /// Max-entropy fractional perfect matching.
    Entropy(EntropyArgs),
    /// Anneal-and-shift from a base matching.
    Anneal(AnnealArgs),
    /// Weight-guided random greedy trajectories.
    Greedy(GreedyArgs),
    /// Exact perfect matching count.
    Count(GraphArgs),
    /// Exact edge marginals of the uniform perfect matching.
    Marginals(GraphArgs),
    /// Entropy lower bound through the bipartite lift, and the count report.
    Bound(BoundArgs),
    /// Run the acceptance suite or check the provenance of an output directory.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Emit `K_n^(k)` instead of random instances.
    #[arg(long)]
    pub complete: bool,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.9)]
    pub density: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_attempts: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DegreesArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AnnealArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Near-optimal base matching; solved for when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Well-distributed matching; estimated by Monte Carlo when absent.
    #[arg(long)]
    pub hat_weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Picked automatically when absent.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Well-distributedness constant of the hat matching; measured when absent.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopArg {
    Fraction,
    Freeze,
}

#[derive(Debug, Args, Serialize)]
pub struct GreedyArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Number of trajectories; run `r` uses `derive_seed(seed, r)`.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.05)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = StopArg::Fraction)]
    pub stop: StopArg,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub sets_per_size: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Acceptance,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Output directory whose digests should be rechecked.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

/// Outcome of a dispatched command.
#[derive(Debug)]
pub struct Outcome {
    /// Printed to stdout.
    pub summary: serde_json::Value,
    /// All requested checks passed.
    pub passed: bool,
}

pub use commands::dispatch;

/// Stable tag for an error raised anywhere in the harness.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<hyperpm::Error>() {
        e.kind()
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else if err.downcast_ref::<serde_json::Error>().is_some() {
        "parse"
    } else {
        "error"
    }
}

pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}
