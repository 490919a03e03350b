use thiserror::Error;

pub type Result<T, E = SbmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SbmError {
    #[error("classification produced no active cells")]
    NoActiveCells,

    #[error(
        "closest-point projection failed for face {face:?}, point {point:?} (residual {residual:e})"
    )]
    ProjectionFailed {
        face: Option<usize>,
        point: Vec<f64>,
        residual: f64,
    },

    #[error("shift of length {shift:e} at face {face}, point {point} exceeds limit {limit:e}: geometry under-resolved")]
    ShiftTooLarge {
        face: usize,
        point: usize,
        shift: f64,
        limit: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("operator misconfigured: {0}")]
    Misconfigured(String),

    #[error("problem too large for dense probing: {dofs} DoFs exceeds limit {limit}")]
    TooLarge { dofs: usize, limit: usize },

    #[error("GMRES did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SbmError {
    pub(crate) fn size(expected: usize, actual: usize) -> Self {
        SbmError::SizeMismatch { expected, actual }
    }
}
