//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the numerics and model layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// An unscaled special-function value exceeds the f64 range.
    #[error("{op} overflows f64 for argument {arg}; use the scaled variant")]
    Overflow { op: &'static str, arg: f64 },

    /// Adaptive integration ran out of its evaluation budget. The best
    /// estimate so far is carried along with its error bound.
    #[error("integration budget exhausted: best estimate {best} (error {error:.3e} > tol {tol:.3e})")]
    BudgetExceeded { best: f64, error: f64, tol: f64 },

    /// A covariance matrix is not positive semidefinite beyond the clamping
    /// threshold.
    #[error("covariance not positive semidefinite: pivot {pivot} = {value:.6e}")]
    NotPositiveSemidefinite { pivot: usize, value: f64 },

    /// A model self-check failed (moment inconsistency, excessive rejection
    /// rate, and similar conditions that invalidate the output).
    #[error("model diagnostic failure: {0}")]
    Diagnostic(String),

    /// Scenario parsing or validation failure.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// Filesystem failure while writing results.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
