//! Dense complex linear algebra on tensor-product spaces.

mod bipartite;
pub mod eigen;
mod matrix;
pub mod superop;

pub use bipartite::{
    partial_trace_factors, partial_transpose_factors, real_embedding, subsystem_permutation,
    BipartiteOperator, Subsystem,
};
pub use eigen::{
    eigenvalues, hermitian_eigen, max_eigenvalue, min_eigenvalue, operator_norm, psd_projection,
    trace_norm, HermitianEigen,
};
pub use matrix::{kron, kron_vec, ComplexMatrix};

/// Deviation from Hermiticity (induced infinity norm) accepted before inputs are
/// symmetrized as `(X + X^dagger) / 2`.
pub const HERMITICITY_TOL: f64 = 1e-10;
