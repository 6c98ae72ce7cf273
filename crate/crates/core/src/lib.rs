//! Numerical companion to the sharp weighted Sobolev–Poincaré trace
//! inequality: constants, bubble extensions, weighted integral identities,
//! Fermi-coordinate test-function asymptotics and a discrete constrained
//! minimization of the trace quotient.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appendix;
pub mod asymptotics;
pub mod bubble;
pub mod constants;
pub mod error;
pub mod geometry;
pub mod poly;
pub mod quadrature;
pub mod rayleigh;

pub use constants::{ConstantSet, SobolevParams};
pub use error::{Error, Result};
