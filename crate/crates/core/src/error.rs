use thiserror::Error;

#[derive(Debug, Error)]
pub enum QffError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("zero-probability branch selected (p = {0:e})")]
    ZeroProbabilityBranch(f64),
    #[error("branch probabilities sum to {0}, expected 1")]
    ProbabilityMismatch(f64),
    #[error("frame is not representable in a stabilizer eigenbasis: {0}")]
    NotStabilizer(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("episode already terminated")]
    Terminated,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("search too large: {0}")]
    SearchTooLarge(String),
    #[error("effective decay time undefined: {0}")]
    DecayUndefined(String),
    #[error("effective decay time is infinite (no decay observed)")]
    DecayInfinite,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, QffError>;
