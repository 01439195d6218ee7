//! `specmix`: simulate, unmix, evaluate, analyze and bench from the shell.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O error,
//! 4 shape or data error.

mod commands;
mod simspec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use specmix_core::solvers::Method;
use specmix_core::Error;

#[derive(Debug, Parser)]
#[command(name = "specmix", version, about = "Spectral unmixing toolkit for fluorescence microscopy")]
struct Cli {
    /// Override every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log output (once for info, twice for debug).
    #[arg(long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a phantom and simulate its acquisition.
    Simulate {
        /// Simulation spec (phantom, acquisition, layout, spectra); a
        /// previous `manifest.json` also works.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unmix a spectral image.
    Unmix {
        #[arg(long, value_parser = clap::value_parser!(Method))]
        method: Method,
        spectral: PathBuf,
        mixing: PathBuf,
        /// Solver configuration JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for `est_<method>.spmx`.
        #[arg(long)]
        out: PathBuf,
        /// Renormalise mixing-matrix columns that do not sum to one.
        #[arg(long)]
        renormalize: bool,
    },
    /// Compare an estimate against ground truth.
    Evaluate {
        gt: PathBuf,
        est: PathBuf,
        /// Spectral image for the spectral SNR column.
        spectral: Option<PathBuf>,
        /// Output directory for `metrics.json` and `metrics.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Conditioning report of a mixing matrix.
    Analyze {
        mixing: PathBuf,
        #[arg(long)]
        renormalize: bool,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark sweep.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code for a library error.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_)) => 3,
        Some(
            Error::NoOverlap { .. }
            | Error::MalformedSpectrum { .. }
            | Error::MissingSpectrum { .. }
            | Error::InvalidLayout(_)
            | Error::InvalidMixingMatrix(_)
            | Error::InvalidSpec(_)
            | Error::InvalidPartition(_)
            | Error::InvalidConfig(_)
            | Error::Json(_)
            | Error::Csv(_),
        ) => 2,
        Some(_) => 4,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        #[cfg(feature = "parallel")]
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        #[cfg(not(feature = "parallel"))]
        log::info!("built without `parallel`; running on one thread");
    }

    let result = match cli.command {
        Command::Simulate { spec, out } => commands::simulate(&spec, &out, cli.seed),
        Command::Unmix { method, spectral, mixing, spec, out, renormalize } => {
            commands::unmix(method, &spectral, &mixing, spec.as_deref(), &out, renormalize, cli.seed)
        }
        Command::Evaluate { gt, est, spectral, out } => commands::evaluate(&gt, &est, spectral.as_deref(), &out),
        Command::Analyze { mixing, renormalize, out } => commands::analyze(&mixing, renormalize, out.as_deref()),
        Command::Bench { spec, out } => commands::bench(&spec, &out, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
