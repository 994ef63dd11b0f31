use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A vector or matrix had a different shape than the operation expects.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A domain constraint on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The optimizer produced a non-finite loss and aborted.
    #[error("non-finite loss ({value}) at epoch {epoch}; aborting")]
    NonFiniteLoss { epoch: usize, value: f64 },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
