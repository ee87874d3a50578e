//! Command-line driver: train forests, explain test points, simulate LSS
//! data and run the evaluation grid, each run leaving a manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod manifest;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigFile, Mode, Scale};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lssfind", version, about = "Local signed interactions from CART random forests")]
pub struct Cli {
    /// Seed for every random choice of the run [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "LSSFIND_THREADS")]
    pub threads: Option<usize>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON overriding the defaults; a run manifest is accepted too.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest on a CSV file.
    Train(TrainArgs),
    /// Select or score signed interactions and features for test points.
    Explain(ExplainArgs),
    /// Draw a dataset from an LSS model and write its ground truth.
    Simulate(SimulateArgs),
    /// Run the ranking evaluation over a simulation grid.
    Evaluate(EvaluateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Explain(_) => "explain",
            Command::Simulate(_) => "simulate",
            Command::Evaluate(_) => "evaluate",
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column, by name or 0-based index [default: y].
    #[arg(long)]
    pub label: Option<String>,
    /// Trees in the forest [default: 500]
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Candidate features per node [default: ceil(p/2)].
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Nodes with fewer samples are not split [default: 1].
    #[arg(long)]
    pub min_node_size: Option<usize>,
    /// Only allow splits that keep both child cells above a volume ratio.
    #[arg(long)]
    pub balanced: bool,
    /// Balance constant in (0, 0.5) [default: 0.1].
    #[arg(long)]
    pub c_gamma: Option<f64>,
    /// Forest file name inside the output directory [default: forest.json].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ExplainArgs {
    /// Forest JSON written by `train`.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    /// One test point as comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "points")]
    pub point: Option<Vec<f64>>,
    /// CSV of test points with a header row.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Impurity-decrease threshold on the sample-weighted scale [default: 0.01].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Minimum scaled DWP for a global candidate [default: 0.01]
    #[arg(long)]
    pub eta_dwp: Option<f64>,
    /// Minimum local prevalence for selection [default: 0.01]
    #[arg(long)]
    pub eta_pp: Option<f64>,
    /// Largest interaction size considered [default: 3].
    #[arg(long)]
    pub s_max: Option<usize>,
    /// Ranking rows kept per point in interactions mode [default: 10].
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// Number of interaction terms.
    #[arg(long)]
    pub j: Option<usize>,
    /// Features per term.
    #[arg(long)]
    pub l: Option<usize>,
    /// Signal-to-noise ratio [default: 1]
    #[arg(long)]
    pub snr: Option<f64>,
    /// Samples to draw.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of features [default: 20].
    #[arg(long)]
    pub p: Option<usize>,
    /// Model spec JSON instead of the benchmark family.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct EvaluateArgs {
    /// Grid JSON; the default grid when omitted.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Preset for trees, test points and replicates [default: desk]
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Replicates per grid cell
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Trees per fitted forest
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Test points per replicate
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Results file name inside the output directory [default: results.csv].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Settings shared by every subcommand.
pub struct Context {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub file: ConfigFile,
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        threads: cli.threads,
        out_dir: cli.out_dir,
        file,
    };
    std::fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", ctx.out_dir.display())))?;
    // output is buffered so the command can run inside a sized pool
    let dispatch = || {
        let mut buf = Vec::new();
        let res = match cli.command {
            Command::Train(args) => commands::train(&ctx, args, &mut buf),
            Command::Explain(args) => commands::explain(&ctx, args, &mut buf),
            Command::Simulate(args) => commands::simulate(&ctx, args, &mut buf),
            Command::Evaluate(args) => commands::evaluate(&ctx, args, &mut buf),
        };
        (res, buf)
    };
    let (res, buf) = match ctx.threads {
        Some(0) => return Err(CliError::Input("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(dispatch),
        None => dispatch(),
    };
    out.write_all(&buf)?;
    res
}
