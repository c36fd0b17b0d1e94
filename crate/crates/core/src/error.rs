use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("covariance matrix not positive definite (jitter would exceed {limit:e})")]
    NotPositiveDefinite { limit: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("mismatched ensemble: {0}")]
    MismatchedEnsemble(String),

    #[error("level {level} too deep (maximum {max})")]
    LevelTooDeep { level: i32, max: i32 },

    #[error("depth {depth} exceeds grid resolution (maximum {max})")]
    DepthExceedsGrid { depth: u32, max: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("insufficient levels: {found} usable level pairs, need {needed}")]
    InsufficientLevels { found: usize, needed: usize },

    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),

    #[error("nonpositive exponent sum {0}")]
    NonPositiveSum(f64),

    #[error("malformed input at `{field}`: {reason}")]
    Format { field: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
