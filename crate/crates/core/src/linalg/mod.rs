//! Dense matrix kernels: a row-major matrix type, SPD matrices, Jacobi
//! eigen/singular value decompositions, pseudo-inverses, Kronecker products
//! and commutation matrices.

mod decomp;
mod kron;
mod matrix;
mod spd;

pub use decomp::{pinv, spd_sqrt, svd_complete, svd_thin, sym_eig, SvdFactors, SymEigen, RANK_TOL};
pub use kron::{commutation, kron};
pub use matrix::RealMatrix;
pub use spd::SpdMatrix;
