//! Numerical laboratory for sequences of conformal metrics `g_j = f_j² g₀`
//! on flat tori and round spheres.

pub mod convergence;
pub mod error;
pub mod examples;
pub mod geodesics;
pub mod geometry;
pub mod numeric;
pub mod par;
pub mod quadrature;
pub mod runner;

pub use error::{Error, Result};
