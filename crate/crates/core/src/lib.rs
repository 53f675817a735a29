//! Flux-recovery a posteriori error estimators for conforming P1 finite elements.

// Indexed loops read better for small dense matrices; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptivity;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod recovery;
pub mod report;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
