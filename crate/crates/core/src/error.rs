//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A stated precondition of an operation is violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical procedure failed to converge or lost stability.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Evaluation requested outside a tabulated range.
    #[error("extrapolation outside tabulated range: {0}")]
    Extrapolation(String),

    /// Two redundant computations disagree beyond tolerance.
    #[error("consistency check failed: {0}")]
    Consistency(String),

    /// Requested capability is intentionally not provided.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed configuration input.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
