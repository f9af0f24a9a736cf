use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid network instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("user index {index} out of range for {n} users")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("oracle limited to {max} users, got {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("invalid linear program: {0}")]
    InvalidLp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
