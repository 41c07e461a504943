use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("infeasible sketch size: m = {m} must exceed the effective dimension {d_lambda}")]
    InfeasibleSketchSize { m: usize, d_lambda: f64 },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("DPP rejection sampler stalled after {rounds} rounds")]
    SamplerStalled { rounds: usize },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("point outside the domain of the loss: {0}")]
    InfeasiblePoint(String),

    #[error("line search failed after {halvings} halvings")]
    LineSearchFailed { halvings: usize },

    #[error("refusing to enumerate 2^{n} subsets (limit is n <= {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
