use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported degree {degree} (supported: 1..={max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("unknown knot name `{0}`")]
    UnknownKnot(String),

    #[error("coincident points have no direction")]
    CoincidentPoints,

    #[error("embedding check failed: {0}")]
    NotEmbedded(String),

    #[error("degenerate projection after {0} attempts")]
    DegenerateProjection(usize),

    #[error("parameter {t} lies in removed subinterval {hole}")]
    OutsideDomain { t: f64, hole: usize },

    #[error("weight system is not primitive")]
    NotPrimitive,

    #[error("sample budget must be positive")]
    EmptyBudget,

    #[error("gamma contract violated: {0}")]
    GammaContract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
