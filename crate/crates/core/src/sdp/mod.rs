//! Conic-program intermediate representation and the solver backend contract.
//!
//! Programs are assembled from complex operator data; the embedding into real
//! cones happens here so callers can stay in operator language.

mod clarabel_backend;
mod program;

use num_complex::Complex64;
use serde::Serialize;

pub use clarabel_backend::ClarabelBackend;
pub use program::{BlockHandle, BlockKind, BlockLayout, ConicProgram, EqualityHandle, EqualityRow};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, ComplexMatrix};
use program::{block_value, ProgramShape, RowPart};

/// Default absolute and relative solver tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    /// Largest real PSD cone side length accepted.
    pub max_block_dim: usize,
    pub warm_start: bool,
    /// Whether `solve` may be called from several threads at once.
    pub concurrent_solves: bool,
}

/// Farkas certificate of primal infeasibility, normalized to `<b, y> = 1`.
#[derive(Clone, Debug, Serialize)]
pub struct FarkasCertificate {
    /// `max |A^T y|` over free parameters plus the dual-cone violation of the PSD slack.
    pub residual: f64,
    pub verified: bool,
}

pub trait SolverBackend {
    fn capabilities(&self) -> Capabilities;

    fn solve(&self, prog: &ConicProgram, tolerance: f64) -> Result<ConicSolution>;

    /// Program builder sized to this backend.
    fn new_program(&self) -> ConicProgram {
        ConicProgram::with_max_block_dim(self.capabilities().max_block_dim)
    }
}

/// Result of a solve. Duals follow the convention `c - A^T y` in the dual cone.
#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Status as reported by the backend, for diagnostics.
    pub backend_status: String,
    pub objective_value: f64,
    pub dual_objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: u32,
    pub solve_time: f64,
    /// Parameter vector of all blocks.
    pub primal: Vec<f64>,
    /// One multiplier per equality row of the program.
    pub dual_equalities: Vec<f64>,
    pub farkas: Option<FarkasCertificate>,
    pub(crate) shape: ProgramShape,
}

/// Matrix read back from a solved block.
#[derive(Clone, Debug)]
pub struct Extracted {
    pub matrix: ComplexMatrix<f64>,
    /// Hermiticity deviation before symmetrization plus, for PSD blocks, the
    /// negative part of the smallest eigenvalue.
    pub residual: f64,
}

impl ConicSolution {
    pub fn has_point(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::NumericalLimit)
    }

    pub fn extract_complex(&self, h: BlockHandle) -> Result<Extracted> {
        if !self.has_point() {
            return Err(Error::Solver(format!("no primal point with status {:?}", self.status)));
        }
        let layout = self.shape.layout(h)?;
        let raw = block_value(layout, &self.primal);
        let mut residual = 0.0;
        let matrix = if raw.is_square() {
            residual += raw.hermiticity_deviation();
            raw.hermitian_part()
        } else {
            raw
        };
        if layout.kind.cone_dim().is_some() {
            residual += (-min_eigenvalue(&matrix)?).max(0.0);
        }
        Ok(Extracted { matrix, residual })
    }

    /// Multiplier of an operator equality as a matrix `W` of the target shape, so
    /// that the Lagrangian term is `Re <W, sum_k map_k(X_k) - target>`.
    pub fn equality_dual(&self, h: EqualityHandle) -> Result<ComplexMatrix<f64>> {
        let group = self.shape.group(h)?;
        let (r, c) = group.shape;
        let mut w = ComplexMatrix::zeros(r, c);
        for &(row, i, j, part) in &group.rows {
            let y = self.dual_equalities[row];
            let half = if group.hermitian && i != j { 0.5 } else { 1.0 };
            let z = match part {
                RowPart::Re => Complex64::new(y * half, 0.0),
                RowPart::Im => Complex64::new(0.0, y * half),
            };
            w[(i, j)] += z;
            if group.hermitian && i != j {
                w[(j, i)] += z.conj();
            }
        }
        Ok(w)
    }

    pub fn blocks(&self) -> &[BlockLayout] {
        &self.shape.blocks
    }
}

#[cfg(test)]
mod tests;
