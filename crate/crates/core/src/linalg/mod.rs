//! Weighted vectors, bilinear forms and the small dense LP/polytope kernel.

mod form;
pub mod lp;
pub mod polytope;
mod vector;

pub use form::{BilinearForm, DenseForm, LowRankForm};
pub use lp::{solve_lp, solve_lp_with, LinearProgram, LpOptions, LpOutcome, Row, Sense};
pub use polytope::{enumerate_vertices, recession_cone_trivial, recession_ray, PolytopeH};
pub use vector::{WeightedVector, Weights};

#[allow(unused_imports)]
pub(crate) use vector::{dot, max_abs};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight {index} is {value}, weights must be positive and finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("non-finite coefficient {0}")]
    NonFinite(f64),
    #[error("form is not symmetric at ({row}, {col}), defect {defect:e}")]
    Asymmetric { row: usize, col: usize, defect: f64 },
    #[error("simplex pivot limit {limit} reached")]
    IterationLimit { limit: usize },
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("size {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}
