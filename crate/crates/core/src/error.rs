use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid format: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
