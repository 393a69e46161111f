//! Symmetric-extension (outer) and perturbed-extension (inner) semidefinite
//! hierarchies for bipartite separability.

pub mod decomp;
pub mod error;
pub mod hierarchy;
pub mod jacobi;
pub mod linalg;
pub mod scalar;
pub mod sdp;
pub mod states;
pub mod symmetry;
pub mod tasks;

pub use error::{Error, Result};
pub use linalg::{BipartiteOperator, ComplexMatrix, Subsystem};
pub use scalar::{Cx, Real};

/// Double-precision aliases; the solver-facing modules work in `f64` only.
pub type CMatrix = ComplexMatrix<f64>;
pub type BipartiteOp = BipartiteOperator<f64>;
pub type Complex = Cx<f64>;
