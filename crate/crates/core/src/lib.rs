//! Numerical geometry of contact sub-Riemannian structures: Tanno tensors,
//! normal geodesics, canonical curvature along geodesics, the small-time
//! expansion of the geodesic cost, conjugate times and diameter bounds.

pub mod error;
pub mod asymptotics;
pub mod canonical;
pub mod comparison;
pub mod flow;
pub mod series;
pub mod structure;

pub use error::{Error, Result};
