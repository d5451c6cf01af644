use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("refused by the Seiberg gate: violated {0:?}")]
    Seiberg(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
