//! Numerical laboratory for conformal metrics with prescribed negative
//! curvature and conical or cusp singularities on the flat torus.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubble;
pub mod cli;
pub mod continuation;
pub mod error;
pub mod field;
pub mod green;
pub mod measure;
pub mod parallel;
pub mod point;
pub mod quad;
pub mod report;
pub mod solver;
pub mod spectral;

pub use error::{CmlError, Result};
pub use field::{Chart, Field, ScalarField};
pub use measure::Divisor;
pub use point::Point;
