//! Command-line driver: simulate benchmark data, fit the Boolean-expression
//! regression engine, score reports against ground truth, run replication
//! studies, and predict held-out responses.
//!
//! Every run echoes its fully resolved configuration (ending with a
//! `seed=<u64>` line where randomness is involved) to stderr, so any output
//! can be reproduced from its log. Usage problems — bad flags, paths, or
//! config files — exit with status 2; failures during a run exit with 1.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// A command failure, classified for the exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: flags, paths, file formats, configuration. Exit 2.
    Usage(String),
    /// The run itself failed. Exit 1.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// Wrap an engine error found while loading or validating inputs.
    pub fn usage(e: impl fmt::Display) -> CliError {
        CliError::Usage(e.to_string())
    }

    /// Wrap an engine error raised mid-run. Configuration complaints keep
    /// usage status even here: they mean the invocation was wrong.
    pub fn runtime(e: boolreg::Error) -> CliError {
        match e {
            boolreg::Error::Config { .. } | boolreg::Error::InsufficientColumns { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "boolreg",
    version,
    about = "Bayesian regression on Boolean expressions of binary covariates",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark dataset (CSV plus ground-truth sidecar).
    Simulate(commands::SimulateArgs),
    /// Fit the model search to a CSV and report expression probabilities.
    Fit(commands::FitArgs),
    /// Score a fitted report against a ground-truth sidecar.
    Score(commands::ScoreArgs),
    /// Run a full simulate-fit-score replication study.
    Study(commands::StudyArgs),
    /// Fit on training data and predict a held-out test set.
    Predict(commands::PredictArgs),
}

/// Search-engine settings shared by `fit`, `study`, and `predict`.
/// Unset flags fall back to the config file, then to the defaults shown.
#[derive(Args, Debug, Default)]
pub struct EngineFlags {
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Population size: candidate trees per generation [default: 15]
    #[arg(long)]
    d: Option<usize>,
    /// Leading trees never dropped during evolution [default: 0]
    #[arg(long)]
    protected: Option<usize>,
    /// Per-tree leaf budget [default: 5]
    #[arg(long)]
    cmax: Option<usize>,
    /// Maximum number of terms in a model [default: 15]
    #[arg(long)]
    kmax: Option<usize>,
    /// Crossover joins with AND with this probability [default: 0.9]
    #[arg(long = "p-and")]
    p_and: Option<f64>,
    /// Negation probability in crossover/modification [default: 0.1]
    #[arg(long = "p-not")]
    p_not: Option<f64>,
    /// Inclusion level below which survival is stochastic [default: 0.2]
    #[arg(long = "rho-min")]
    rho_min: Option<f64>,
    /// Probability a vacancy is refilled with a fresh leaf [default: 0.2]
    #[arg(long = "fresh-leaf-prob")]
    fresh_leaf_prob: Option<f64>,
    /// Number of generations [default: 20]
    #[arg(long)]
    tmax: Option<usize>,
    /// Sampler iterations per exploratory generation [default: 250]
    #[arg(long = "explore-iters")]
    explore_iters: Option<usize>,
    /// Sampler iterations in the final generation [default: 10000]
    #[arg(long = "final-iters")]
    final_iters: Option<usize>,
    /// Registry capacity: retained model records per chain [default: 10000]
    #[arg(long)]
    mfin: Option<usize>,
    /// Independent search chains [default: 1]
    #[arg(long)]
    chains: Option<usize>,
    /// Master random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Model-prior log penalty per complexity unit [default: -2 ln p]
    #[arg(long = "log-penalty", allow_hyphen_values = true)]
    log_penalty: Option<f64>,
    /// Complexity measure: leaves | operators [default: leaves]
    #[arg(long)]
    measure: Option<String>,
    /// Keep fitted coefficients for prediction [default: true]
    #[arg(long = "retain-coefficients")]
    retain_coefficients: Option<bool>,
    /// Attempt budget for candidate tree generation [default: 100]
    #[arg(long = "candidate-retries")]
    candidate_retries: Option<usize>,
    /// Probability an iteration attempts a mode jump [default: 0.05]
    #[arg(long = "jump-prob")]
    jump_prob: Option<f64>,
    /// Minimum indicators flipped by a local step [default: 1]
    #[arg(long = "min-flip")]
    min_flip: Option<usize>,
    /// Maximum indicators flipped by a local step [default: 3]
    #[arg(long = "max-flip")]
    max_flip: Option<usize>,
    /// Minimum indicators flipped to start a mode jump [default: 5]
    #[arg(long = "min-jump")]
    min_jump: Option<usize>,
    /// Maximum indicators flipped to start a mode jump [default: 10]
    #[arg(long = "max-jump")]
    max_jump: Option<usize>,
    /// Post-climb per-indicator randomization probability [default: 0.05]
    #[arg(long = "rand-flip-prob")]
    rand_flip_prob: Option<f64>,
    /// Cap on greedy ascent steps inside a mode jump [default: 50]
    #[arg(long = "greedy-max-steps")]
    greedy_max_steps: Option<usize>,
    /// Chain combination: weighted | union [default: weighted]
    #[arg(long)]
    aggregation: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Score(args) => commands::score(args),
        Command::Study(args) => commands::study(args),
        Command::Predict(args) => commands::predict(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
