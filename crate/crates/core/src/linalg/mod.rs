//! Sparse and dense linear-algebra kernels.

pub mod lsqr;
pub mod lu;
pub mod sparse;
pub mod spectral;
pub mod vector;

pub use lsqr::{lsqr, LsqrOutcome, LsqrStop};
pub use lu::{lu_factorize, Factorization};
pub use sparse::SparseMatrix;
pub use spectral::{
    hermitian_split, min_singular_value, operator_norm, skew_spectral_radius, spectral_norm,
    symmetric_eig_extremes,
};
pub use vector::{abs_vec, norm2};
