//! Optimal high-order tensor methods for composite convex minimization.

pub mod ahpe;
pub mod ats;
pub mod baselines;
pub mod bisection;
pub mod error;
pub mod multilinear;
pub mod oracle;
pub mod taylor;

pub use error::{Error, Result};
