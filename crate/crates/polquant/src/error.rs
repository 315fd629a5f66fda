//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the algebra, the solvers and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands live on tori of different dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Two Weyl elements carry different geometries or truncation policies.
    #[error("geometry/truncation mismatch: {0}")]
    GeometryMismatch(String),

    /// An input violates an operation's precondition.
    #[error("rejected input: {0}")]
    Rejected(String),

    /// A derivative order exceeds the configured maximum.
    #[error("derivative order {requested} exceeds maximum {max}")]
    DerivativeOrder { requested: usize, max: usize },

    /// A structural guarantee failed; indicates a bug, not bad input.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    /// Malformed configuration file or CLI flag value.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem problems while reading configs or writing reports.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
