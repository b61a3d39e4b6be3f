use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph generation failed: {0}")]
    GenerationFailure(String),

    #[error("invalid coin order {0}")]
    InvalidOrder(usize),

    #[error("coin block for vertex {vertex} is not unitary (deviation {deviation:.3e})")]
    NonUnitary { vertex: usize, deviation: f64 },

    #[error("dense matrix of order {order} exceeds the guard of {guard}")]
    SizeGuard { order: usize, guard: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
