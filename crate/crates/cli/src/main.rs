//! `tslif`: simulate, analyze, train and benchmark TS-LIF neurons.
//!
//! Exit codes: 0 on success, 1 when a computation fails its contract
//! (non-finite values, singular responses, training blow-ups), 2 for usage
//! and configuration errors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Settings;
use output::OutDir;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<tslif_core::Error> for CliError {
    fn from(e: tslif_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

/// Run flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Global {
    /// Flat key/value config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (default: $TSLIF_OUT, else ./tslif-out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for benchmark grids.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "tslif", version, about = "TS-LIF neuron simulation, analysis and experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drive a neuron population with a stimulus and record its traces.
    Simulate(commands::simulate::SimulateArgs),
    /// Eigenvalues, stability verdict and frequency response.
    Analyze(commands::analyze::AnalyzeArgs),
    /// Train a spiking forecaster.
    Train(commands::forecast::TrainArgs),
    /// Score a trained forecaster on its test split.
    Eval(commands::forecast::EvalArgs),
    /// Energy per inference for ANN or SNN operation counts.
    Energy(commands::energy::EnergyArgs),
    /// Delayed spiking XOR benchmark.
    Xor(commands::xor::XorArgs),
}

/// Resolved global settings handed to each subcommand.
pub struct Run {
    pub settings: Settings,
    pub seed: u64,
    pub jobs: usize,
    pub out: OutDir,
}

fn resolve(global: Global) -> Result<Run, CliError> {
    let settings = Settings::load(global.config.as_deref())?;
    let seed = settings.u64("seed", global.seed)?.unwrap_or(0);
    let jobs = settings.usize("jobs", global.jobs)?.unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let out = match global.out {
        Some(p) => p,
        None => match settings.string("out", None)? {
            Some(s) => PathBuf::from(s),
            None => std::env::var_os("TSLIF_OUT").map_or_else(|| PathBuf::from("tslif-out"), PathBuf::from),
        },
    };
    settings.touch("out");
    Ok(Run {
        settings,
        seed,
        jobs,
        out: OutDir::new(out),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let run = resolve(cli.global)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(&run, a),
        Command::Analyze(a) => commands::analyze::run(&run, a),
        Command::Train(a) => commands::forecast::train(&run, a),
        Command::Eval(a) => commands::forecast::eval(&run, a),
        Command::Energy(a) => commands::energy::run(&run, a),
        Command::Xor(a) => commands::xor::run(&run, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tslif: {e}");
            ExitCode::from(e.code())
        }
    }
}
