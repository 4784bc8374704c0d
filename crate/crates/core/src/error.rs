use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical parameter is outside its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// Inputs are individually valid but the requested evaluation is outside
    /// the domain of the formula (q = 0, |arth argument| >= 1, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Problem is too large for the dense algorithm that was requested.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("stability bound `{bound}` violated: {detail}")]
    Stability { bound: String, detail: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// A numerical invariant monitored during a run was violated.
    #[error("invariant `{invariant}` violated at step {step}: {detail}")]
    Invariant {
        invariant: String,
        step: usize,
        detail: String,
    },
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Prefix the field name of an `InvalidParameter` with the enclosing block.
    pub fn in_block(self, block: &str) -> Self {
        match self {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: format!("{block}.{field}"),
                reason,
            },
            other => other,
        }
    }

    /// True for errors caused by bad input rather than by a failed numerical contract.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Domain(_) | Error::DimensionMismatch { .. }
        )
    }
}
