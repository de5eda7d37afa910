use thiserror::Error;

/// Errors surfaced by the library. Each variant maps onto one failure class
/// the command-line front end turns into a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A statistic that does not exist for the given data (zero variance,
    /// all-degenerate positions, ...). Reported instead of NaN.
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
