use thiserror::Error;

/// Errors produced by the engine, the loaders and the composite layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("unsupported model file version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
    #[error("composition error: {0}")]
    Composition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the `tmc` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Format(_)
            | Error::Consistency(_)
            | Error::Integrity(_)
            | Error::Version { .. }
            | Error::Io(_) => 3,
            Error::Composition(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
