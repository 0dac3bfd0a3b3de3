//! `pt-privacy`: solve and reproduce the privacy-mechanism experiments from
//! the command line with deterministic seeding and machine-readable output.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error,
//! 4 assertion failure (sweep outputs are still written).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod config;

mod commands;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    AssertionFailed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::AssertionFailed(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) | CliError::AssertionFailed(m) => m,
        }
    }
}

impl From<pt_privacy::Error> for CliError {
    fn from(e: pt_privacy::Error) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Solver(format!("io error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "pt-privacy",
    about = "Optimal differentially private data collection against prospect-theoretic participants",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON run configuration; omitted fields take the shipped defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (solve) or directory (sweeps).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the fully resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the optimal privacy level by all applicable methods.
    Solve {
        /// Solve against a materialized population imported from CSV
        /// (header `w,lambda,beta,eps_ref`) instead of the configured
        /// homogeneous one.
        #[arg(long)]
        roster: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a scripted experiment; writes CSV plus a JSON assertion summary.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        /// Worker threads for independent sweep cells (output is canonical
        /// regardless).
        #[arg(long)]
        jobs: Option<usize>,
        /// Heterogeneous parameter to spread (hetero sweep only).
        #[arg(long, value_enum, default_value_t = WhichArg::Lambda)]
        which: WhichArg,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the Laplace mechanism once on a CSV column of values in [0, 1].
    NoiseDemo {
        /// CSV file with one value per line (optional `value` header).
        #[arg(long)]
        data: PathBuf,
        /// Privacy level of the mechanism.
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Also draw this many noise samples and compare their variance
        /// against the analytic accuracy penalty.
        #[arg(long)]
        trials: Option<u64>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Gap,
    Pt,
    Refpoint,
    Mismatch,
    Hetero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichArg {
    Lambda,
    Beta,
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_path = Some(out.to_string_lossy().into_owned());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Entry point used by `main`; parses `std::env` arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parses and executes `args`, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };

    let outcome = match &cli.command {
        Command::Solve { roster, common } => load_config(common).and_then(|cfg| {
            if common.dump_config {
                println!("{}", cfg.to_pretty_json());
                return Ok(());
            }
            match roster {
                Some(path) => commands::cmd_solve_roster(&cfg, path),
                None => commands::cmd_solve(&cfg),
            }
        }),
        Command::Sweep {
            kind,
            jobs,
            which,
            common,
        } => load_config(common).and_then(|cfg| {
            if common.dump_config {
                println!("{}", cfg.to_pretty_json());
                return Ok(());
            }
            commands::cmd_sweep(&cfg, *kind, *which, *jobs)
        }),
        Command::NoiseDemo {
            data,
            eps,
            trials,
            common,
        } => load_config(common).and_then(|cfg| {
            if common.dump_config {
                println!("{}", cfg.to_pretty_json());
                return Ok(());
            }
            commands::cmd_noise_demo(&cfg, data, *eps, *trials)
        }),
    };

    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
