//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky pivot at `pivot` fell below the positive-definiteness threshold.
    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Projected gradient hit its iteration cap. `best` is the last iterate.
    #[error("box QP solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A precondition of a closed-form result (budget limit, diagonal covariance, ...) does not hold.
    #[error("not applicable: {0}")]
    Applicability(String),

    /// A runtime invariant failed; indicates a numerical or logic defect.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Domain(_) | Error::NotSpd { .. } => 2,
            Error::NonConvergence { .. } => 3,
            Error::Applicability(_) | Error::Unsupported(_) => 4,
            Error::Invariant(_) | Error::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
