use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("infeasible ADC assignment: {0}")]
    Assignment(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
