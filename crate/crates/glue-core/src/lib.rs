//! Numerical adiabatic gluing of disk-flow-disk Floer configurations.
//!
//! Maps are sampled on finite cylinders `[τ₋, τ₊] × S¹` in a holomorphic chart of the
//! target. The pipeline is: [`preglue`] builds an approximate solution, [`floer_op`]
//! measures its Cauchy–Riemann defect, [`inverse`] builds a right inverse of the
//! linearization out of per-mode solves, and [`newton`] corrects the approximate
//! solution to a genuine discrete solution.

pub mod adiabatic;
pub mod cylinder;
pub mod decay;
pub mod error;
pub mod examples;
pub mod floer_op;
pub mod flow;
pub mod inverse;
pub mod linalg;
pub mod newton;
pub mod ode;
pub mod preglue;
pub mod probe;
pub mod target;

pub use error::{GlueError, Result};
pub use num_complex::Complex64 as C64;
