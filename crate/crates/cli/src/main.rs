//! Command-line harness around the error-mitigation toolbox: decay scans,
//! multi-exponential fits, mitigated estimates, cost curves and Monte Carlo
//! validation, all emitted as deterministic CSV/JSON.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(qem_core::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<qem_core::Error> for CliError {
    fn from(e: qem_core::Error) -> Self {
        CliError::Numerical(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qem",
    version,
    about = "Quantum error-mitigation experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the circuit parameter seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent jobs (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact noisy expectation values of every Hamiltonian observable on the
    /// probe grid; one CSV per noise model.
    DecayScan(CommonArgs),
    /// Multi-exponential fits and extrapolation biases for a decay CSV.
    Fit {
        /// Input decay CSV (from decay-scan).
        #[arg(long)]
        input: PathBuf,
        /// Largest number of exponential components to try.
        #[arg(long, default_value_t = 2)]
        k_max: usize,
        /// Normalized residual tolerance for model selection.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Mitigated estimates for one method over the probe grid.
    Mitigate {
        #[command(flatten)]
        common: CommonArgs,
        /// Mitigation method to run.
        #[arg(long, value_parser = ["Q", "QE", "QH"])]
        method: String,
        /// Recompute the aggregate rows from the emitted detail rows and
        /// fail on mismatch.
        #[arg(long)]
        self_audit: bool,
    },
    /// Sampling-cost curves C_Q0 / C_QE / C_QH on a (gamma, mu) grid with
    /// crossing annotations.
    Costs {
        /// Comma-separated observable decay rates.
        #[arg(long, default_value = "0,0.5,1")]
        gammas: String,
        #[arg(long, default_value_t = 0.1)]
        mu_min: f64,
        #[arg(long, default_value_t = 4.0)]
        mu_max: f64,
        #[arg(long, default_value_t = 0.1)]
        mu_step: f64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Monte Carlo validation of the quasi-probability estimator and the
    /// symmetry-verification retention rate.
    McValidate(CommonArgs),
}

fn install_thread_pool(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::DecayScan(common) => {
            install_thread_pool(common.threads)?;
            commands::decay_scan::run(&common)
        }
        Command::Fit {
            input,
            k_max,
            tol,
            out,
        } => commands::fit::run(&input, k_max, tol, &out),
        Command::Mitigate {
            common,
            method,
            self_audit,
        } => {
            install_thread_pool(common.threads)?;
            commands::mitigate::run(&common, &method, self_audit)
        }
        Command::Costs {
            gammas,
            mu_min,
            mu_max,
            mu_step,
            out,
        } => commands::costs::run(&gammas, mu_min, mu_max, mu_step, &out),
        Command::McValidate(common) => {
            install_thread_pool(common.threads)?;
            commands::mc_validate::run(&common)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
