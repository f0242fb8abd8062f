use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("matrix is singular or nearly singular (reciprocal condition {rcond:.3e})")]
    Singular { rcond: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("step size {eta} exceeds the admissible cap {cap}")]
    StepSize { eta: f64, cap: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate field: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
