//! Certification of implicit (level-set) geometry for unfitted simulation.
//!
//! The crate is organized bottom-up:
//!
//! - [`field`]: analytic and neural implicit fields with exact value, gradient
//!   and Hessian evaluation (second-order forward-mode for networks).
//! - [`regularity`]: sampled certification of gradient non-degeneracy and
//!   bounded curvature on a tubular neighborhood of the interface.
//! - [`projection`]: Newton closest-point projection, the level-set flow
//!   oracle and success maps.
//! - [`geometry`]: zero-set extraction, Hausdorff distances and the
//!   function-error to geometric-error bound.
//! - [`train`]: a sine-activated MLP fitted to the unit-circle SDF with an
//!   eikonal penalty.
//! - [`solver`]: Q1 elements on a uniform background grid with shifted
//!   boundary Dirichlet conditions for a manufactured Poisson problem.
//! - [`harness`]: experiment sweeps, CSV records and the command line.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod projection;
pub mod regularity;
pub mod solver;
pub mod train;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{ImplicitField, Jet2, Point2};
