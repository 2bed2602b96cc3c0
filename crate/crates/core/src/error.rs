use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its admissible domain or had the wrong shape.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A requested network size cannot be realized.
    #[error("sizing error: {0}")]
    Sizing(String),

    /// The operation needs something the object does not provide
    /// (e.g. a derivative order beyond what is implemented).
    #[error("capability error: {0}")]
    Capability(String),

    /// Training produced a non-finite value.
    #[error("training aborted at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
