use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AtemError {
    #[error("series degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },

    #[error("precision mismatch: {left} bits vs {right} bits")]
    PrecisionMismatch { left: usize, right: usize },

    #[error("invalid precision {0} bits (need 64..=65536)")]
    InvalidPrecision(usize),

    #[error("cannot parse {input:?} as a decimal number")]
    ParseNumber { input: String },

    #[error("recurrence overflowed the exponent range at step n = {n}")]
    Overflow { n: usize },

    #[error("iteration count m = {m} too small (need at least {min})")]
    TooFewIterations { m: usize, min: usize },

    #[error("parity functional requested for a problem without parity symmetry")]
    NotParityProblem,

    #[error("indeterminate boundary: both termination rows vanish")]
    IndeterminateBoundary,

    #[error("resonant indicial exponent: leading coefficient vanishes at n = {n}")]
    ResonantIndicial { n: usize },

    #[error("irregular singular point: A(0) = A'(0) = 0")]
    IrregularSingularPoint,

    #[error("unsupported quasi-exact level j = {0} (supported: 1, 2, 3)")]
    UnsupportedLevel(usize),

    #[error("invalid energy window: {0}")]
    InvalidWindow(String),

    #[error("no sign change in bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("quantization functional failed at E = {energy}: {source}")]
    FunctionalFailed {
        energy: f64,
        #[source]
        source: Box<AtemError>,
    },

    #[error("shooting oracle found no crossing within ±{radius} of E = {guess}")]
    OracleFailure { guess: f64, radius: f64 },

    #[error("x = {0} lies outside the radial domain x >= 0")]
    Domain(f64),

    #[error("degenerate state: norm {0:e} is below the floor")]
    DegenerateState(f64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("unknown problem {0:?} (expected harmonic, anharmonic or quantum_dot)")]
    UnknownProblem(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    SpecParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = AtemError> = std::result::Result<T, E>;
