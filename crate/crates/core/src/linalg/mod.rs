//! Dense linear algebra: the matrix type, symmetric eigensolver, SPD solves,
//! the Gram-route trace-norm kernels and SVD reference routines.

mod cholesky;
mod eigen;
mod kernels;
pub(crate) mod matrix;
pub mod reference;

pub use cholesky::{spd_solve, SpdFactor};
pub use eigen::{symmetric_eig, EigenPair};
pub use kernels::{
    nuclear_norm, nuclear_norm_and_subgradient, singular_values, svt, trace_norm_subgradient, trace_norm_subgradient_with, KernelTolerances,
};
pub use matrix::Matrix;
