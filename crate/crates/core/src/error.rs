use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or insufficient input data.
    #[error("input error: {0}")]
    Input(String),
    /// A parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Root finding, optimisation or linear algebra failed.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// The requested operation is not supported for this object.
    #[error("capability error: {0}")]
    Capability(String),
    /// Inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// File or parse failure.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
