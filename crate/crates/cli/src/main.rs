use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;
mod verify;

use config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "se2h", version, about = "Harmonic analysis on SE(2) and its crystallographic coset spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the sampled checks of `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Multiply the transforms in the wrong order in convolution checks.
    #[arg(long, global = true)]
    debug_swap_conv_order: bool,
    /// Treat numerical warnings as failures (exit code 3).
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Spectral operator summaries of each test function.
    Transform,
    /// Coefficient tables, reconstruction errors and diagnostics.
    Series,
    /// Run every identity check and report defects against tolerances.
    Verify,
    /// Coset convolutions, convolution coefficients and Plancherel routes.
    Convolve,
    /// List the orthonormal basis.
    Basis,
}

pub struct Options {
    pub out: PathBuf,
    pub seed: u64,
    pub swap_conv_order: bool,
}

/// What a command found besides its files.
#[derive(Default)]
pub struct Outcome {
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors share the config-error exit code
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Some(path) = cli.config.as_ref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    let experiment = match ExperimentConfig::load(path).and_then(|c| c.validate()) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| experiment.config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("cannot create {}: {e}", out.display());
        return ExitCode::from(1);
    }
    let options = Options {
        out,
        seed: cli.seed,
        swap_conv_order: cli.debug_swap_conv_order,
    };
    let result = match cli.command {
        Command::Transform => commands::transform(&experiment, &options),
        Command::Series => commands::series(&experiment, &options),
        Command::Verify => verify::run(&experiment, &options),
        Command::Convolve => commands::convolve(&experiment, &options),
        Command::Basis => commands::basis(&experiment, &options),
    };
    match result {
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!("failed: {f}");
                }
                ExitCode::from(2)
            } else if cli.strict && !outcome.warnings.is_empty() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
