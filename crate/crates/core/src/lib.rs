//! ℓ1-analysis regularization for linear inverse problems.
//!
//! Solves `min_x ½‖y − Φx‖² + λ‖D*x‖₁`, analyses the solution through its
//! cosupport, and estimates prediction, projection and estimation risks
//! with Generalized SURE so that `λ` can be chosen from one observation.

pub mod bench;
pub mod cosparse;
pub mod error;
pub mod krylov;
pub mod linops;
pub mod prox;
pub mod risk;
pub mod vecops;

pub use error::{Error, Result};
pub use linops::{DictionarySpec, LinearMap, LinearOperator};
pub use prox::{Problem, Solution, SolverParams};
