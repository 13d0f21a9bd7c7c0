//! `vbll`: generate, split, balance, train, evaluate and sweep a
//! variational Bayesian linear classifier with a rejection gate.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "vbll",
    version,
    about = "Selective prediction with a variational Bayesian linear head"
)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Root seed; every random stream in the run is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON run configuration (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic Gaussian-blob dataset CSV.
    Gen(commands::GenArgs),
    /// Stratified split into train.csv, val.csv and test.csv.
    Split(commands::SplitArgs),
    /// SMOTE oversampling to per-class target counts.
    Balance(commands::BalanceArgs),
    /// Train a layer; writes model.json and trace.csv.
    Train(commands::TrainArgs),
    /// Evaluate a model with the rejection gate and calibration metrics.
    Eval(commands::EvalArgs),
    /// Rejection curve over a threshold grid.
    Sweep(commands::SweepArgs),
    /// Compare analytic ELBO gradients with central differences.
    Gradcheck(commands::GradcheckArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::RunConfig::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    let out = cli.common.out;
    match cli.command {
        Command::Gen(a) => commands::gen(a, cfg, out),
        Command::Split(a) => commands::split(a, cfg, out),
        Command::Balance(a) => commands::balance(a, cfg, out),
        Command::Train(a) => commands::train(a, cfg, out),
        Command::Eval(a) => commands::eval(a, cfg, out),
        Command::Sweep(a) => commands::sweep(a, cfg, out),
        Command::Gradcheck(a) => commands::gradcheck(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("{line}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message.replace('\n', " "));
            e.exit_code()
        }
    }
}
