//! `quasiherm` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "quasiherm",
    version,
    about = "Energy-dependent eigenproblems, metrics and FV evolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frozen bi-orthogonal spectrum of H(z) at `problem.z`.
    Spectrum(CommonArgs),
    /// Physical levels from the fixed points z = E(z).
    Fixedpoint(CommonArgs),
    /// Overlap matrix, K, L and the metrics μ, ν.
    Metric(CommonArgs),
    /// Feshbach-Villars evolution and pseudo-norm conservation.
    Evolve(CommonArgs),
    /// Built-in acceptance suite.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides `validate.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Optional; only the `[validate]` and `[output]` sections are read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    NoLevels(String),
    ValidationFailed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::NoLevels(_) => 3,
            CliError::ValidationFailed => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Solver(msg) => write!(f, "solver error: {msg}"),
            CliError::NoLevels(msg) => write!(f, "no physical levels: {msg}"),
            CliError::ValidationFailed => write!(f, "acceptance suite failed"),
        }
    }
}

impl From<quasiherm::Error> for CliError {
    fn from(e: quasiherm::Error) -> Self {
        CliError::Solver(e.to_string())
    }
}

fn load(config: Option<&PathBuf>, out_dir: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = out_dir {
        cfg.output.dir = dir;
    }
    if let Some(seed) = seed {
        cfg.validate.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(args) => commands::validate(&load(args.config.as_ref(), args.out_dir, args.seed)?),
        Command::Spectrum(args) => commands::spectrum(&load(Some(&args.config), args.out_dir, args.seed)?),
        Command::Fixedpoint(args) => commands::fixedpoint(&load(Some(&args.config), args.out_dir, args.seed)?),
        Command::Metric(args) => commands::metric(&load(Some(&args.config), args.out_dir, args.seed)?),
        Command::Evolve(args) => commands::evolve(&load(Some(&args.config), args.out_dir, args.seed)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quasiherm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
