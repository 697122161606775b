use thiserror::Error;

/// Errors raised by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or non-finite input data.
    #[error("data error: {0}")]
    Data(String),

    /// The operation is not available for this smoother kind.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The engine has already processed its final time step.
    #[error("sequence exhausted: engine already reached t2 = {t2}")]
    SequenceExhausted { t2: u64 },

    /// A test decision was requested before any critical value existed.
    #[error("not calibrated: no critical value before t1 = {t1}")]
    NotCalibrated { t1: u64 },

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
