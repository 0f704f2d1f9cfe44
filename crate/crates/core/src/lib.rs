//! Numerical laboratory for the system of N falling balls: exact event-driven
//! dynamics, the reduced tangent cocycle with its invariant cone field,
//! velocity-gap and expansion diagnostics, and the three-ball wedge picture.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod sim;
pub mod tangent;
pub mod wedge;

pub use error::{Error, Result};
