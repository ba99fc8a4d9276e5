//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A site, exciton, or matrix index lies outside the valid range.
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    /// Matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A density matrix violates one of its structural invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A physical or numerical parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested hierarchy would exceed the configured size limit.
    #[error("hierarchy size {count} exceeds the configured maximum {max}")]
    HierarchyTooLarge { count: usize, max: usize },

    /// A propagation aborted mid-run because the state left its validity
    /// envelope (insufficient depth or step size), or an integrator failed.
    #[error("numerical failure at t = {t_fs} fs: {detail}")]
    NumericalFailure { t_fs: f64, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
