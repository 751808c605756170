use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "gcr", version, about = "Generalized correlation regression for clustered data")]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, env = "GCR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit mean and correlation models to a long-format CSV.
    Fit(FitArgs),
    /// Generate a simulation scenario as CSV plus its ground truth.
    Simulate(SimulateArgs),
    /// Empirical residual correlations for pair subgroups of a stored fit.
    Diagnose(DiagnoseArgs),
    /// Repeated cluster-level k-fold cross-validation.
    Cv(CvArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Long-format CSV, one row per observation.
    #[arg(long)]
    pub data: PathBuf,
    /// Column identifying clusters.
    #[arg(long)]
    pub cluster: String,
    /// Response column.
    #[arg(long)]
    pub response: String,
    /// Column ordering observations within a cluster.
    #[arg(long)]
    pub order: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// gaussian, poisson, bernoulli or gamma.
    #[arg(long)]
    pub family: String,
    /// Mean formula, e.g. "x1 + C(x2)". The intercept is implicit.
    #[arg(long)]
    pub mean: String,
    /// Pair-covariate formula, e.g. "intercept + same(g)".
    #[arg(long, default_value = "intercept")]
    pub corr: String,
    /// Scoring step size in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Convergence tolerance on the max relative parameter change.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Maximum outer iterations.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Accept undamped steps without halving.
    #[arg(long)]
    pub no_backtracking: bool,
    /// Freeze the correlation parameters at zero (working independence).
    #[arg(long)]
    pub independence: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON report on stdout instead of tables.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// study1_gaussian, study1_poisson, study1_bernoulli or study2_case1..4.
    #[arg(long)]
    pub scenario: String,
    /// Number of clusters.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth JSON destination.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    /// JSON written by `gcr fit --out`.
    #[arg(long)]
    pub fit: PathBuf,
    /// The CSV the fit was computed from.
    #[arg(long)]
    pub data: PathBuf,
    /// Pair subgroup, e.g. "within:same(mom)". Repeatable.
    #[arg(long = "subgroup", default_value = "within")]
    pub subgroups: Vec<String>,
    /// Candidate pairs above which a seeded uniform sample is used.
    #[arg(long, default_value_t = gcr_core::diagnostics::DEFAULT_MAX_PAIRS)]
    pub max_pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 15)]
    pub repeats: usize,
    /// Column whose value on each cluster's first row defines its stratum.
    #[arg(long)]
    pub stratify: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Second correlation formula scored on the same folds, with paired t-tests.
    #[arg(long)]
    pub baseline_corr: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}
