use thiserror::Error;

/// Errors produced by geometry, estimation and harness code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid tangent: {0}")]
    InvalidTangent(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("injectivity guard violated: {0}")]
    GuardViolation(String),
    #[error("non-unique geodesic: {0}")]
    NonUniqueGeodesic(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("estimation failure: {0}")]
    Estimation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
