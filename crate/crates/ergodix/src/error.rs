//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, expression handling, hypergraph
/// queries and the numerical solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong length for the model it was used with.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The model data violates a construction invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Expression text could not be parsed.
    #[error("parse error at {line}:{col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },

    /// An expression coordinate failed to evaluate (1-based coordinate).
    #[error("evaluation error in coordinate {coord}: {msg}")]
    Eval { coord: usize, msg: String },

    /// A divergence probe of `T(alpha * 1_J)` failed.
    #[error("probe failed for tail {tail} at alpha = {alpha}: {source}")]
    Probe {
        tail: String,
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    /// An iteration produced NaN or left the representable range.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
