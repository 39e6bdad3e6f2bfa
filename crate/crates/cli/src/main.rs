//! `bonsai`: train, predict, evaluate and inspect shallow-tree XMC models.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "bonsai",
    version,
    about = "Shallow label trees for extreme multi-label classification"
)]
struct Cli {
    /// Worker threads; defaults to the number of available cores. 1 gives bit-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an ensemble and write the model directory.
    Train(TrainArgs),
    /// Predict the top labels of every instance in a data file.
    Predict(PredictArgs),
    /// Score a prediction file against ground truth.
    Eval(EvalArgs),
    /// Print dataset statistics and the label-frequency histogram.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training data file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model directory.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub trees: usize,
    /// Branching factor K.
    #[arg(long, default_value_t = 100)]
    pub branch: usize,
    /// Depth limit; 1 for up to 40000 labels, else 2.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Label representation: input, output or joint.
    #[arg(long, default_value = "input")]
    pub repr: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Relative gradient-norm stopping tolerance of the solver.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Weights with magnitude at most this are dropped.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_newton_iters: usize,
    #[arg(long, default_value_t = 50)]
    pub kmeans_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub kmeans_tol: f64,
    #[arg(long, default_value_t = 1)]
    pub kmeans_restarts: usize,
    /// Train on raw feature values instead of unit-normalized instances.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test data file; its labels are ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// Output prediction file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = bonsai_core::predict::DEFAULT_BEAM)]
    pub beam: usize,
    /// Labels written per instance.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Prediction file written by `predict`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth data file.
    #[arg(long)]
    pub data: PathBuf,
    /// Training data file, for label propensities.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = bonsai_core::PropensityModel::DEFAULT_A)]
    pub a: f64,
    #[arg(long, default_value_t = bonsai_core::PropensityModel::DEFAULT_B)]
    pub b: f64,
    /// Give every label propensity 1.
    #[arg(long)]
    pub uniform_propensity: bool,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Histogram output (`rank count` lines); stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let run = || {
        commands::init_threads(cli.threads).and_then(|()| match &cli.command {
            Command::Train(a) => commands::train(a),
            Command::Predict(a) => commands::predict(a),
            Command::Eval(a) => commands::eval(a),
            Command::Stats(a) => commands::stats(a),
        })
    };
    // A panic is a bug, not bad input.
    let result = std::panic::catch_unwind(run)
        .unwrap_or_else(|_| Err(commands::CliError::Internal("internal error".into())));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
