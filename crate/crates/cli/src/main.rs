mod args;
mod commands;
mod output;
mod svg;

use std::process::ExitCode;

use clap::Parser;
use ptlevels::eigen::EigenError;
use ptlevels::hamiltonian::HamiltonianError;
use ptlevels::pade::PadeError;
use ptlevels::perturb::PerturbError;
use ptlevels::sweep::SweepError;

/// Environment variable overriding the worker thread count.
const THREADS_VAR: &str = "PTLEVELS_THREADS";

// exit codes; clap itself exits with 2 on malformed arguments
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_PERTURB: u8 = 4;
const EXIT_PADE: u8 = 5;
const EXIT_TRACKING: u8 = 6;
const EXIT_UNCONVERGED: u8 = 7;
const EXIT_IO: u8 = 8;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    pub fn tracking(message: impl Into<String>) -> Self {
        Failure { code: EXIT_TRACKING, message: message.into() }
    }

    pub fn unconverged(message: impl Into<String>) -> Self {
        Failure { code: EXIT_UNCONVERGED, message: message.into() }
    }
}

impl From<HamiltonianError> for Failure {
    fn from(e: HamiltonianError) -> Self {
        Failure { code: EXIT_SOLVER, message: e.to_string() }
    }
}

impl From<EigenError> for Failure {
    fn from(e: EigenError) -> Self {
        Failure { code: EXIT_SOLVER, message: e.to_string() }
    }
}

impl From<PerturbError> for Failure {
    fn from(e: PerturbError) -> Self {
        Failure { code: EXIT_PERTURB, message: e.to_string() }
    }
}

impl From<PadeError> for Failure {
    fn from(e: PadeError) -> Self {
        Failure { code: EXIT_PADE, message: e.to_string() }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        let code = match e {
            SweepError::InvalidConfig(_) => EXIT_USAGE,
            SweepError::Eigen { .. } | SweepError::Hamiltonian(_) => EXIT_SOLVER,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_IO, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { code: EXIT_IO, message: e.to_string() }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::usage(e.to_string()))
}

fn run() -> Result<(), Failure> {
    let argv = args::expand_config(std::env::args_os().collect())?;
    let cli = args::Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    init_threads()?;
    commands::dispatch(cli)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
