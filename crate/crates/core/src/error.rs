use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need at least 2")]
    InvalidDimension(usize),

    #[error("parametrization error: {0}")]
    Parametrization(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("visibility {0} outside [0, 1]")]
    VisibilityOutOfRange(f64),

    #[error("unsupported scenario: {0}")]
    Unsupported(String),

    #[error("LP solver failure: {0}")]
    Solver(#[from] crate::lp::simplex::LpError),

    #[error("objective returned non-finite value {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
