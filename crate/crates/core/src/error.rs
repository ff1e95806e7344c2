use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("{op}: expected a nonempty square matrix, got {rows}x{cols}")]
    Shape {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is not Hermitian (relative deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("power iteration did not converge in {iterations} iterations (best estimate {best_estimate})")]
    NoConvergence {
        iterations: usize,
        best_estimate: f64,
    },
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("warm start is not strictly feasible (min slack {min_slack:e})")]
    InfeasibleStart { min_slack: f64 },
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("Newton iteration failed at barrier t={t:e} after {iterations} steps: {reason}")]
    NewtonFailure {
        t: f64,
        iterations: usize,
        reason: String,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },
    #[error("surrogate form mismatch: {0}")]
    FormMismatch(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
