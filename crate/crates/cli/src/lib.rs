//! Command-line front end: `dwd train`, `dwd predict` and `dwd bench`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

pub mod commands;
pub mod error;
pub mod model_file;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dwd", version, about = "Generalized distance weighted discrimination")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier on a LIBSVM file.
    Train(TrainArgs),
    /// Predict labels for a LIBSVM file with a saved model.
    Predict(PredictArgs),
    /// Train every dataset with both variants and q = 1, 2; write a CSV table.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Sgs,
    Direct,
}

impl From<VariantArg> for dwd::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Sgs => dwd::Variant::Sgs,
            VariantArg::Direct => dwd::Variant::DirectExtended,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Direct,
    Smw,
    Iterative,
}

impl StrategyArg {
    pub fn to_strategy(self) -> Option<dwd::linalg::Strategy> {
        use dwd::linalg::Strategy;
        match self {
            StrategyArg::Auto => None,
            StrategyArg::Direct => Some(Strategy::DirectCholesky),
            StrategyArg::Smw => Some(Strategy::Smw),
            StrategyArg::Iterative => Some(Strategy::Iterative),
        }
    }
}

/// Solver settings shared by `train` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Use class weights for unbalanced data.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub weighted: bool,
    #[arg(long, default_value_t = dwd::solver::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = dwd::solver::DEFAULT_TOL)]
    pub tol: f64,
    /// Scalar of the coupling `D = μI`.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Seed for the distance subsample and Lanczos start vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    pub force_strategy: StrategyArg,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training data (LIBSVM format, optionally .gz).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Penalty parameter; chosen from the data when omitted.
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Sgs)]
    pub variant: VariantArg,
    /// Feature dimension; defaults to the largest index in the data.
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Per-iteration CSV log.
    #[arg(long)]
    pub log_out: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write predicted labels; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ignore features beyond the model's dimension instead of failing.
    #[arg(long)]
    pub clip_features: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Datasets, run in the order given.
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => commands::cmd_train(&a),
        Command::Predict(a) => commands::cmd_predict(&a),
        Command::Bench(a) => commands::cmd_bench(&a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
