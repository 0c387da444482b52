mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::UsageError;

/// Cluster, solve and evaluate blendshape rig inversions.
#[derive(Debug, Parser)]
#[command(name = "facerig", version)]
pub struct Cli {
    /// Directory for every artifact written by the command.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Seed for all randomness of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON object whose keys override the corresponding flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Log informational messages (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic rig, a ground-truth animation and noisy targets.
    Gen(GenArgs),
    /// Partition a model into mesh and controller clusters.
    Cluster(ClusterArgs),
    /// Score a clustering method over a range of cluster counts.
    SweepK(SweepArgs),
    /// Solve a sequence of target meshes for controller weights.
    Solve(SolveArgs),
    /// Fit, sparsity and smoothness metrics of solved weights.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Full,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub triples: Option<usize>,
    #[arg(long)]
    pub quads: Option<usize>,
    /// Vertices per blendshape footprint.
    #[arg(long)]
    pub locality: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Expected active controllers per frame.
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// Per-coordinate noise standard deviation (cm).
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Vertex groups with disjoint footprints.
    #[arg(long)]
    pub regions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub method: String,
    /// Number of clusters (rsjd, rsjd_a, rs).
    #[arg(long)]
    pub k: Option<usize>,
    /// JSON list of vertex index lists (required for ssk).
    #[arg(long)]
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub method: String,
    /// Inclusive range `a..b` (or `a..=b`), or a comma list of values.
    #[arg(long)]
    pub k_range: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub targets: PathBuf,
    /// holistic, naive or admm.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub clustering: Option<PathBuf>,
    /// Prefix of the output files (defaults to the method name).
    #[arg(long)]
    pub prefix: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub admm_iters: Option<usize>,
    #[arg(long)]
    pub cd_iters: Option<usize>,
    #[arg(long)]
    pub cd_tol: Option<f64>,
    #[arg(long)]
    pub admm_tol: Option<f64>,
    #[arg(long)]
    pub zero_threshold: Option<f64>,
    /// One coordinate sweep per ADMM x-update.
    #[arg(long)]
    pub inexact: bool,
    /// Run ADMM cluster updates in parallel.
    #[arg(long)]
    pub parallel: bool,
    /// Start each frame from the previous solution.
    #[arg(long)]
    pub warm_start: bool,
    /// Shuffle the coordinate order every sweep.
    #[arg(long)]
    pub shuffle: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub targets: PathBuf,
    /// Ground-truth weights for the cardinality band and weight errors.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub zero_threshold: Option<f64>,
    /// Prefix of the output files.
    #[arg(long, default_value = "eval")]
    pub prefix: String,
}

/// Exit status: 2 for usage errors, 3 for data or validation errors, 4 for
/// numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<facerig_core::Error>() {
        Some(e) if e.is_numerical() => 4,
        Some(facerig_core::Error::InvalidArgument(_)) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
