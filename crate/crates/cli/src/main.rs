//! `mbn`: train multilayer bootstrap networks and run their evaluation workflows.

mod commands;
mod config;
mod input;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use input::DataArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Mbn(#[from] mbn::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Parser)]
#[command(name = "mbn", version, about = "Multilayer bootstrap networks", args_override_self = true)]
struct Cli {
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, env = "MBN_THREADS", default_value_t = 0)]
    threads: usize,
    /// Seed for every random decision
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Only print warnings and errors
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network and write the model and training embedding
    Train(TrainArgs),
    /// Embed new data with a trained network
    Transform(TransformArgs),
    /// k-means on an embedding, scored against its labels
    Cluster(ClusterArgs),
    /// Retrieval precision of an embedding at several depths
    Retrieve(RetrieveArgs),
    /// Bias/variance curves and their Monte Carlo verification
    Theory(TheoryArgs),
    /// Distill a network into a small feedforward model
    Distill(DistillArgs),
    /// SVG scatter plot of a 2-D embedding
    Scatter(ScatterArgs),
    /// Training-time scaling in the sample count
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// Squared Euclidean distance
    Euclidean,
    /// Dot product (cosine after --normalize l2)
    Dot,
}

fn open_unit(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|_| format!("{text:?} is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie strictly between 0 and 1"))
    }
}

fn unit(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|_| format!("{text:?} is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie in (0, 1]"))
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Output embedding dimension
    #[arg(long)]
    pub dims: usize,
    /// Bottom-layer k (default: min(0.5n, --k-max))
    #[arg(long)]
    pub k1: Option<usize>,
    /// Smallest k (default: ceil(1.5 * --classes))
    #[arg(long)]
    pub k_last: Option<usize>,
    /// Ratio between consecutive k
    #[arg(long, default_value_t = 0.5, value_parser = open_unit)]
    pub delta: f64,
    /// Rough number of classes, used for the default smallest k
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Upper limit on k1
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Clusterings per layer
    #[arg(long, default_value_t = 400)]
    pub v: usize,
    /// Fraction of features each clustering sees
    #[arg(long, default_value_t = 0.5, value_parser = unit)]
    pub a: f64,
    /// Bottom-layer similarity
    #[arg(long, value_enum, default_value = "euclidean")]
    pub metric: Metric,
    #[arg(long, default_value_t = 100)]
    pub pca_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub pca_tol: f64,
    /// Model output file
    #[arg(long)]
    pub model: PathBuf,
    /// Training embedding CSV
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    /// Timing report (JSON)
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TransformArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Embedding CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClusterMode {
    /// Mean and spread over independent runs
    Mean,
    /// Run with the smallest objective
    Best,
    Both,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ClusterArgs {
    /// Embedding CSV with labels in --label-column
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub label_column: usize,
    /// Number of clusters (default: number of classes)
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ClusterMode,
    /// Report CSV (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub label_column: usize,
    /// Retrieval depths; those not below the corpus size are dropped
    #[arg(long, default_value = "1,3,7,15,31,63,127,255,511,1023")]
    pub levels: String,
    /// Precision CSV (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TheoryArgs {
    #[arg(long, default_value_t = 0.01)]
    pub rho_step: f64,
    /// Values of sigma^2 / sigma_input^2
    #[arg(long, default_value = "1,2,4,8")]
    pub ratios: String,
    /// Ensemble sizes
    #[arg(long, default_value = "10,50,100,400")]
    pub vs: String,
    /// Curve CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Monte Carlo draws per setting
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_draws: usize,
    /// Random settings to verify (0 skips verification)
    #[arg(long, default_value_t = 30)]
    pub mc_settings: usize,
    /// Allowed deviation in standard errors
    #[arg(long, default_value_t = 3.0)]
    pub mc_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistillMode {
    /// Targets are one-hot k-means clusters of the embedding
    Indicator,
    /// Targets are the embedding itself
    Embedding,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DistillArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Trained network
    #[arg(long)]
    pub model: PathBuf,
    /// Precomputed training embedding CSV (default: transform the data)
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "indicator")]
    pub mode: DistillMode,
    /// Clusters for indicator targets
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    /// Hidden layer widths
    #[arg(long, default_value = "256,256")]
    pub hidden: String,
    /// Hidden dropout rate (default: 0.2 for indicator targets, 0 otherwise)
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Minibatch size (default: 128 for indicator targets, 32 otherwise)
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub momentum: f64,
    /// Rows timed for the speedup report
    #[arg(long, default_value_t = 500)]
    pub speed_sample: usize,
    /// MLP output file
    #[arg(long)]
    pub out: PathBuf,
    /// Training predictions CSV
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ScatterArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub label_column: usize,
    #[arg(long, default_value_t = 600)]
    pub size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Sample counts
    #[arg(long, default_value = "2000,4000")]
    pub n: String,
    /// Ensemble sizes
    #[arg(long, default_value = "100")]
    pub v: String,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Bottom-layer k, held fixed across sample counts
    #[arg(long, default_value_t = 1000)]
    pub k1: usize,
    #[arg(long)]
    pub k_last: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.5, value_parser = open_unit)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5, value_parser = unit)]
    pub a: f64,
    #[arg(long, value_enum, default_value = "euclidean")]
    pub metric: Metric,
    /// Timing CSV
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Train(a) => commands::train(&a, seed),
        Command::Transform(a) => commands::transform(&a),
        Command::Cluster(a) => commands::cluster(&a, seed),
        Command::Retrieve(a) => commands::retrieve(&a),
        Command::Theory(a) => commands::theory(&a, seed),
        Command::Distill(a) => commands::distill(&a, seed),
        Command::Scatter(a) => commands::scatter(&a),
        Command::Bench(a) => commands::bench(&a, seed),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(2);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
