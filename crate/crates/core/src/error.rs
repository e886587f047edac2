use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("genome contains a cycle")]
    CyclicGenome,
    #[error("invalid genome: {0}")]
    InvalidGenome(String),
    #[error("pool too small: need at least {required} members, got {actual}")]
    PoolTooSmall { required: usize, actual: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("episode fault: {0}")]
    Fault(String),
    #[error("invalid design file: {0}")]
    InvalidDesign(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
