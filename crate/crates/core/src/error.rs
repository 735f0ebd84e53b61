use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid box at component {index}: lower {lower} > upper {upper}")]
    InvalidBox {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("point is infeasible")]
    Infeasible,
    #[error("point is outside the set at component {index}")]
    OutsideSet { index: usize },
    #[error("{what} is not finite at the probe point")]
    NonFiniteValue { what: String },
    #[error("multiplier set is empty")]
    EmptyMultiplierSet,
    #[error("multiplier set is unbounded")]
    UnboundedMultiplierSet,
    #[error("multiplier is not in the multiplier set: {0}")]
    NotAMultiplier(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
