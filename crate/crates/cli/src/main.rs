//! `qcdeform`: command-line front end. Every report embeds the resolved
//! run configuration; identical configuration and seed give identical bytes.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::Failure;

#[derive(Parser, Debug)]
#[command(name = "qcdeform", version, about = "Quasiconformal deformations of holomorphic functions and companion numerics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Run configuration (JSON). An optional "input" key holds the
    /// subcommand input.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Subcommand input (JSON); overrides the config's "input".
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Sets every tolerance of the configuration.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Solve a deformation problem.
    Deform,
    /// Build the map of a Beltrami coefficient and check it by finite differences.
    Verify,
    /// Schwarzian derivative of a series.
    Schwarzian,
    /// Solve S_w = f for w with prescribed w(0), w'(0), w''(0).
    Ode,
    /// Expansion of 1/w(1/z) and the coefficient round trip.
    Invert,
    /// Error curve of double-pole rational fits.
    Approx {
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Lower bound for sup |c_n| over nonvanishing unit-norm functions.
    HszSearch {
        #[arg(long, default_value_t = 0)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
    },
    /// Sampled comparison of coefficients with those of the |c_1| maximizer.
    Thm2Check {
        #[arg(long, default_value_t = 1000)]
        families: usize,
        #[arg(long, default_value_t = 8)]
        members: usize,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        b2_bound: f64,
    },
    /// Boundary estimate of the covering radius of a normalized series.
    Covering {
        /// Use the Koebe function truncated at this degree instead of an input.
        #[arg(long, value_name = "DEGREE")]
        koebe: Option<usize>,
        #[arg(long, default_value_t = 4096)]
        samples: usize,
    },
    /// Closed-form identity suite for the Cauchy and Beurling transforms.
    OpsSelftest,
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("QCDEFORM_THREADS") {
        let n: usize = v.parse().map_err(|_| Failure::usage(format!("QCDEFORM_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Failure::usage("QCDEFORM_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let run = configure_threads().and_then(|_| commands::run(&cli));
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qcdeform: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
