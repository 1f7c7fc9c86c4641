//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by measure construction, transport solvers, propagation,
/// and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Two measures (or a measure and a map family) live on different phase spaces.
    #[error("space mismatch")]
    SpaceMismatch,

    /// The exact transport oracle only solves desk-scale instances.
    #[error("oracle size cap: {rows}x{cols} plan exceeds {cap} cells")]
    OracleSizeCap { rows: usize, cols: usize, cap: usize },

    /// Propagation produced more atoms than the configured cap and the prune
    /// mode cannot reduce further. Loud failure keeps exactness claims honest.
    #[error("support overflow: {support} atoms exceeds cap {cap}")]
    SupportOverflow { support: usize, cap: usize },

    /// Backward propagation requires invertible maps.
    #[error("not invertible: {0}")]
    NotInvertible(String),

    /// Large-deviations fit had no usable grid points.
    #[error("no exceedances; increase trials or decrease epsilon")]
    NoExceedances,

    /// A named field violated its contract.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

impl Error {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
