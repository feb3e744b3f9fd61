//! Construction and certification of measures with prescribed ball growth
//! and annular power decay, classification of homogeneous constant-
//! coefficient operators as elliptic and/or canceling, and an explicit
//! bounded vector field witnessing solvability of `div f = mu`.
//!
//! The building blocks:
//!
//! - [`dyadic`]: integer-indexed dyadic cubes, fractal set generators,
//!   box-counting dimension.
//! - [`measure`]: atomic measures with closed-ball queries and annular
//!   decomposition.
//! - [`frostman`]: greedy Frostman construction on dyadic trees with a
//!   brute-force antichain oracle, plus ball-growth normalization.
//! - [`decay`]: annular reweighting and exact decay certificates against
//!   explicit constants.
//! - [`growth`]: ball-growth suprema, exact Dini-type integrals and the
//!   pointwise regularity check behind them.
//! - [`symbol`]: operator symbols, ellipticity margins, the canceling
//!   intersection, formal adjoints.
//! - [`witness`]: direct-sum Riesz kernel fields solving `div f = mu`,
//!   weak residual checks, sup-norm refinement studies.

pub mod decay;
pub mod dyadic;
pub mod error;
pub mod frostman;
pub mod growth;
pub mod io;
pub mod measure;
pub mod numeric;
mod stepsup;
pub mod symbol;
pub mod witness;

pub use error::{Error, Result};
