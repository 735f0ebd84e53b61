pub mod cones;
pub mod counterexamples;
pub mod curvature;
pub mod error;
pub mod io;
pub mod kkt;
pub mod linalg;
pub mod model;
pub mod report;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::Tolerances;
