//! Matrix-variate generalised Birnbaum-Saunders distributions.
//!
//! The distribution is built from the matrix transformation
//! `Z = (V Δ^{-1} - V'^+ Δ) Ξ^{-1}` applied to an elliptically contoured
//! `n x m` matrix `Z`, with `T = V'V` the positive definite observation.
//! This crate provides the supporting linear algebra, elliptical kernels
//! (Gaussian and Kotz), the transformation with three independent Jacobian
//! computations, log-densities, branch samplers, and maximum likelihood
//! fitting with BIC* model comparison.

// `!(x > 0.0)` rejects NaN along with nonpositive values; index loops mirror
// the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod density;
pub mod elliptic;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod quad;
pub mod sample;
pub mod special;
pub mod transform;
pub mod validate;

pub use error::{Error, Result};
