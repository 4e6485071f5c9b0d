use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate plane: |X ^ Y|^2 = {0:e} is below tolerance")]
    DegeneratePlane(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("gradient of the distance function is undefined at the base point")]
    UndefinedGradient,

    #[error("immersion condition violated at {point:?}: {reason}")]
    ImmersionViolation { point: Vec<f64>, reason: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("empty constraint set: subspaces of dimension {required} do not fit in a {available}-dimensional tangent space")]
    EmptyConstraintSet { required: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
