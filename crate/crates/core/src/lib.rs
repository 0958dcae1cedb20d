//! Native spaces of 1D spline-admissible operators `L = D^m`.
//!
//! The crate is organized bottom-up:
//!
//! * [`gridfn`] samples functions on a truncated uniform grid and carries
//!   closed forms (polynomials, Green's-function atoms, Dirac atoms) so that
//!   operators can act on them analytically.
//! * [`operator`] holds the derivative operators, their adjoints, Green's
//!   functions, canonical inverses and an admissibility checker.
//! * [`biortho`] builds biorthogonal systems for the null space, the two
//!   null-space projectors and changes of basis.
//! * [`native`] combines the above into stabilized pseudo-inverses, native
//!   and pre-dual norms, the direct-sum decomposition and a randomized
//!   identity suite.
//! * [`solve`] solves the interpolation problem `min ||Lf|| s.t. f(x_m) = y_m`
//!   for the quadratic (`L2`) and total-variation (`M`) regularizers.
//! * [`cli`] implements the problem-file driven command line front end.

// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod biortho;
pub mod cli;
mod error;
pub mod gridfn;
pub mod lp;
pub mod native;
pub mod operator;
pub mod solve;

pub use error::{Error, Result};
