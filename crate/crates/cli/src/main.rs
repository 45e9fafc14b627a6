mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "ivanov", version, about = "Norm-constrained kernel least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output path prefix; results go to standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set bisection.tolerance=1e-12`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Master seed for randomised commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fit the estimator at one radius.
    Fit,
    /// Select the radius on a validation set.
    Validate,
    /// Evaluate the risk bounds.
    Bounds,
    /// Run a convergence-rate experiment.
    Rates,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let out = Output { prefix: cli.out.clone() };
    if cli.seed.is_some() && !matches!(cli.command, Command::Rates) {
        log::warn!("--seed has no effect on this command");
    }
    match cli.command {
        Command::Fit => commands::fit(config, &cli.overrides, &out),
        Command::Validate => commands::validate(config, &cli.overrides, &out),
        Command::Bounds => commands::bounds(config, &cli.overrides, &out),
        Command::Rates => commands::rates(config, &cli.overrides, cli.seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
