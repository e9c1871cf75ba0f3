use thiserror::Error;

#[derive(Debug, Error)]
pub enum H2Error {
    /// Tree, block or buffer shapes do not fit together.
    #[error("structural error: {0}")]
    Structure(String),
    #[error("kernel evaluation failed: {0}")]
    Kernel(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("communication error: {0}")]
    Comm(String),
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, H2Error>;

pub(crate) fn structure<T>(msg: impl Into<String>) -> Result<T> {
    Err(H2Error::Structure(msg.into()))
}
