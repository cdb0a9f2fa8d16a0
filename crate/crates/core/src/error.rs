use alloc::string::String;

/// Errors raised by the algorithmic core.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto distinct exit categories without string matching.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("threshold estimation failed: {0}")]
    Estimation(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
