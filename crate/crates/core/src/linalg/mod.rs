//! Dense and sparse linear algebra kernels.

mod cholesky;
mod csr;
mod dense;
mod eigen;
mod lu;
mod operator;
pub mod vector;

pub use cholesky::{cholesky, CholeskyFactor};
pub use csr::CsrMatrix;
pub use dense::DenseMatrix;
pub use eigen::{gen_sym_eig, jacobi_eig, sym_eig, sym_eigvals, tridiagonal_eig, SymEig};
pub use lu::{lu_solve, LuFactor};
pub use operator::{densify, FnOperator, Identity, LinearOperator, ScaledSum, DENSIFY_LIMIT};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),
    #[error("operator of dimension {dim} exceeds the densification limit {limit}")]
    TooLargeToDensify { dim: usize, limit: usize },
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}
