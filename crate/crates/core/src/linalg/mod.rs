//! Sparse complex matrices, direct LU solves and symmetric eigensolvers.

mod eigs;
mod lu;
mod sparse;
mod tridiag;

pub use eigs::{dense_hermitian_eigs, shift_invert_eigs, EigenPairs};
pub use lu::{lu_solve, relative_residual, LuFactorization};
pub use sparse::{SparseComplexMatrix, TripletBuilder};
pub use tridiag::{tridiag_eigs, TridiagEigen};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry ({row}, {col}) outside a {n}x{n} matrix")]
    OutOfBounds { row: usize, col: usize, n: usize },
    #[error("matrix is structurally singular at row {row}")]
    StructurallySingular { row: usize },
    #[error("pivot breakdown during LU, first bad unknown at row {row}")]
    PivotBreakdown { row: usize },
    #[error("solve residual {residual:.3e} exceeds tolerance")]
    InaccurateSolve { residual: f64 },
    #[error("sparsity pattern differs from the factorized one")]
    PatternChanged,
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("requested {requested} eigenpairs but dimension is {dimension}")]
    TooManyEigenpairs { requested: usize, dimension: usize },
    #[error("backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;
