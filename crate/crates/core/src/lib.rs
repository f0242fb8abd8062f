//! Convergence rates of first-order methods on affine differentiable games.
//!
//! The crate covers dense spectral linear algebra, game generators, the
//! iterative methods themselves (gradient, k-extrapolation, optimistic,
//! consensus and proximal point), spectral and global rate predictions,
//! lower bounds over stationary one-step linear methods, and the random
//! monotone game study driven by the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod games;
pub mod lower_bounds;
mod nelder_mead;
pub mod rates;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
