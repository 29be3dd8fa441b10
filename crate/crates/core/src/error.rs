use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mixed coefficient modes; promote the exact operand with `to_float` first")]
    MixedCoefficientModes,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("zero vector cannot define a reflection")]
    ZeroRoot,

    #[error("unsupported root-system request: {0}")]
    UnsupportedFamily(String),

    #[error("group closure exceeded the cap of {cap} elements; root data is likely corrupted")]
    ClosureCapExceeded { cap: usize },

    #[error("polynomial division left a remainder of norm {norm:.3e}; reflection data is inconsistent")]
    DivisionRemainder { norm: f64 },

    #[error("quadrature accuracy {achieved:.3e} is above the requested tolerance {requested:.3e}")]
    QuadratureAccuracy { requested: f64, achieved: f64 },

    #[error("integration backend not available: {0}")]
    UnsupportedBackend(String),

    #[error("Gram matrix is ill-conditioned (estimate {cond:.3e}); reduce the degree or switch modes")]
    GramIllConditioned { cond: f64 },

    #[error("function is zero (or constant) after mean removal; cannot normalize")]
    ZeroFunction,

    #[error("negative fractional power requires a mean-zero function (mean norm {mean_norm:.3e})")]
    NegativePowerNonzeroMean { mean_norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degree {degree} exceeds the configured cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("parse error: {0}")]
    ParseError(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
