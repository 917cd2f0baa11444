use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (unknown element,
    /// non-prime field size, instance of the wrong family, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested exact computation exceeds its enumeration budget.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed or invariant-violating input data.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Rejection sampling gave up after `trials` unconditional draws.
    #[error("rejection sampling failed after {trials} trials")]
    RejectionFailure { trials: u64 },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips [`Error::Trial`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trial { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
