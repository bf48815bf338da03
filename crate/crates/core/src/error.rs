use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "non-positive entry {value} at ({row}, {col}) cannot take a fractional power; \
         enable the first-quadrant transform"
    )]
    NegativeBase { row: usize, col: usize, value: f64 },

    #[error("matrix is singular to working precision (condition estimate {condition_estimate:e})")]
    SingularMatrix { condition_estimate: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("norm exponent must be positive, got {0}")]
    InvalidP(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("column {col} has zero variance")]
    ZeroVariance { col: usize },

    #[error("quadrant map slope must be non-zero")]
    ZeroSlope,

    #[error("scaling vector denominator vanishes at row {row}")]
    ZeroDenominator { row: usize },

    #[error("feature density must lie in (0, 1], got {0}")]
    InvalidDensity(f64),

    #[error("balanced error rate needs both classes in the targets")]
    SingleClassTarget,

    #[error("invalid class label {0}; expected -1/+1 (or 0/1 on load)")]
    InvalidLabel(f64),

    #[error("insufficient samples: need at least {required}, have {available}")]
    InsufficientSamples { required: usize, available: usize },

    #[error("degenerate rank table: {0}")]
    DegenerateTable(String),

    #[error("Nemenyi critical values are tabulated for 2..=10 algorithms, got {0}")]
    UnsupportedK(usize),

    #[error("noise covariance is not symmetric")]
    AsymmetricNoise,

    #[error("parse error at line {line}, column {col}: {message}")]
    ParseError {
        line: usize,
        col: usize,
        message: String,
    },

    #[error("non-numeric cell {value:?} at line {line}, column {col}")]
    NonNumericCell {
        line: usize,
        col: usize,
        value: String,
    },

    #[error("target column {0:?} not found")]
    MissingTarget(String),

    #[error("model document schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::ParseError {
                line,
                col: 0,
                message: format!("{other:?}"),
            },
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
