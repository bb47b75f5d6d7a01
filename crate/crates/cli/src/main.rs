//! `atem` command-line front end.
//!
//! Exit codes: 0 ok, 2 usage / configuration, 3 empty spectrum or state not
//! found, 4 numeric failure.

mod config;
mod format;
mod report;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use atem::error::AtemError;

pub use config::{ProblemArgs, RunArgs, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "atem", version, about = "Eigenvalues of Schrödinger-type ODEs by asymptotic Taylor expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stable eigenvalues at the largest iteration count.
    Solve(RunArgs),
    /// Eigenvalues for every iteration count in the list, as a grid.
    Converge(RunArgs),
    /// Taylor polynomial and sampled, normalized wavefunction of one state.
    Wavefunction(WaveArgs),
    /// Closed-form quasi-exact quantum-dot levels and their verification.
    QuasiExact(QuasiArgs),
    /// Cross-check the spectrum with a double-precision shooting solver.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct WaveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// State index in the accepted spectrum.
    #[arg(long, default_value_t = 0)]
    pub state: usize,
    /// CSV destination (written atomically).
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Simpson intervals on the sampling grid (even, at least 64).
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    /// Grid half-width; defaults to the problem's.
    #[arg(long)]
    pub half_width: Option<f64>,
}

#[derive(Args, Debug)]
pub struct QuasiArgs {
    /// Angular momentum ℓ.
    #[arg(long = "l", default_value_t = 0.5)]
    pub ell: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Level: 1, 2 or 3.
    #[arg(long)]
    pub j: usize,
    /// Recurrence order through which termination is checked.
    #[arg(long, default_value_t = 20)]
    pub order: usize,
    #[arg(long, default_value_t = 192)]
    pub precision: usize,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Largest |E_atem - E_shoot| counted as verified.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Shooting interval half-width.
    #[arg(long, default_value_t = 8.0)]
    pub shoot_half_width: f64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<AtemError> for Failure {
    fn from(e: AtemError) -> Self {
        use AtemError::*;
        let code = match &e {
            InvalidPrecision(_) | ParseNumber { .. } | InvalidWindow(_) | InvalidParam { .. }
            | UnknownProblem(_) | UnsupportedLevel(_) | Unsupported(_) | SpecParse { .. }
            | Schema(_) | TooFewIterations { .. } | NotParityProblem | ResonantIndicial { .. }
            | IrregularSingularPoint => 2,
            // unreadable spec file is a configuration problem
            Io { .. } => 2,
            _ => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Text for stdout plus the exit status.
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: u8,
}

fn dispatch(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Solve(args) => report::solve(&RunConfig::from_args(&args, "solve")?),
        Command::Converge(args) => report::converge(&RunConfig::from_args(&args, "converge")?),
        Command::Wavefunction(args) => {
            let cfg = RunConfig::from_args(&args.run, "wavefunction")?;
            report::wavefunction(&cfg, &args)
        }
        Command::QuasiExact(args) => report::quasi_exact(&args),
        Command::Oracle(args) => {
            let cfg = RunConfig::from_args(&args.run, "oracle")?;
            report::oracle(&cfg, &args)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(out) => {
            // a closed pipe is not worth a panic
            let _ = std::io::stdout().lock().write_all(out.stdout.as_bytes());
            let _ = std::io::stderr().lock().write_all(out.stderr.as_bytes());
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
