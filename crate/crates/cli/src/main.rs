mod commands;
mod config;
mod error;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oscbath::equilibrium::Mode;

use crate::config::{check_tol, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "oscbath", version, about = "Oscillator coupled to a harmonic bath: kernels, propagators, reduced dynamics, equilibrium")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output file (directory for `propagate`); standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "OSCBATH_THREADS")]
    threads: Option<usize>,
    /// Oracle integration tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel time series as CSV.
    Kernels(Common),
    /// Reduced dynamics of a Gaussian initial state.
    Propagate(Common),
    /// Temperature sweep of Z, <x^2>, <p^2>, <H> with a validation report.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Reduced kernel coefficients as JSON.
    Greens(Common),
    /// Discretized bath as JSON.
    Bath(Common),
    /// Oracle suite report as JSON.
    Validate(Common),
    /// Total propagator at the points listed in the configuration.
    Evaluate(Common),
}

fn setup_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn prepare(common: &Common) -> Result<RunConfig, CliError> {
    setup_threads(common.threads)?;
    RunConfig::load(&common.config)
}

fn output<'a>(common: &'a Common, cfg: &'a RunConfig) -> Option<&'a Path> {
    common.out.as_deref().or(cfg.run.out.as_deref())
}

fn warn_unused_tol(common: &Common) {
    if common.tol.is_some() {
        log::warn!("--tol only affects the validate command");
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Kernels(c) => {
            let cfg = prepare(c)?;
            warn_unused_tol(c);
            commands::kernels(&cfg, output(c, &cfg))
        }
        Command::Propagate(c) => {
            let cfg = prepare(c)?;
            warn_unused_tol(c);
            commands::propagate(&cfg, output(c, &cfg))
        }
        Command::Equilibrium { common, mode } => {
            let cfg = prepare(common)?;
            warn_unused_tol(common);
            commands::equilibrium(&cfg, output(common, &cfg), *mode)
        }
        Command::Greens(c) => {
            let cfg = prepare(c)?;
            warn_unused_tol(c);
            commands::greens(&cfg, output(c, &cfg))
        }
        Command::Bath(c) => {
            let cfg = prepare(c)?;
            warn_unused_tol(c);
            commands::bath(&cfg, output(c, &cfg))
        }
        Command::Evaluate(c) => {
            let cfg = prepare(c)?;
            warn_unused_tol(c);
            commands::evaluate(&cfg, output(c, &cfg))
        }
        Command::Validate(c) => {
            let cfg = prepare(c)?;
            let tol = check_tol(c.tol.or(cfg.run.tol).unwrap_or(validate::DEFAULT_TOL))?;
            let report = validate::run(&cfg, tol)?;
            let mut text = serde_json::to_vec_pretty(&report)?;
            text.push(b'\n');
            commands::emit(output(c, &cfg), &text)?;
            for check in report.checks.iter().filter(|c| !c.passed) {
                log::error!("{} failed: deviation {:e} > {:e} ({})", check.name, check.max_deviation, check.tolerance, check.detail);
            }
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Numerical("validation checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oscbath: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
