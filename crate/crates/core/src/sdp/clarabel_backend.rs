use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::program::cone_entries;
use super::{Capabilities, ConicProgram, ConicSolution, FarkasCertificate, SolveStatus, SolverBackend};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, ComplexMatrix};

/// Interior-point backend on the Clarabel conic solver.
#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    /// Linear system solver used inside the interior-point iterations (`"qdldl"` or `"faer"`).
    pub direct_solve_method: String,
    pub max_iter: u32,
    pub max_block_dim: usize,
    pub verbose: bool,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self {
            direct_solve_method: "faer".into(),
            max_iter: 200,
            max_block_dim: 4096,
            verbose: false,
        }
    }
}

/// Assembled `min q'x  s.t.  Ax + s = b, s in K`.
struct Compiled {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
    /// For every program row, its position among the zero-cone rows.
    row_map: Vec<Option<usize>>,
    num_eq: usize,
    /// `(first row, side length)` of each PSD cone.
    psd_rows: Vec<(usize, usize)>,
}

fn compile(prog: &ConicProgram) -> Compiled {
    let (kept, row_map) = prog.presolve();
    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    for (r, &orig) in kept.iter().enumerate() {
        let row = &prog.rows()[orig];
        for &(p, v) in &row.coeffs {
            ii.push(r);
            jj.push(p);
            vv.push(v);
        }
        b.push(row.rhs);
    }
    let num_eq = kept.len();
    let mut cones = Vec::new();
    if num_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(num_eq));
    }
    let mut psd_rows = Vec::new();
    for layout in prog.blocks() {
        let Some(dim) = layout.kind.cone_dim() else { continue };
        let first = b.len();
        for (pos, p, c) in cone_entries(layout.kind) {
            ii.push(first + pos);
            jj.push(layout.offset + p);
            vv.push(-c);
        }
        b.resize(first + dim * (dim + 1) / 2, 0.0);
        cones.push(SupportedConeT::PSDTriangleConeT(dim));
        psd_rows.push((first, dim));
    }
    let a = CscMatrix::new_from_triplets(b.len(), prog.num_params(), ii, jj, vv);
    Compiled {
        a,
        b,
        q: prog.objective().to_vec(),
        cones,
        row_map,
        num_eq,
        psd_rows,
    }
}

/// Symmetric matrix from an svec with `sqrt(2)`-scaled off-diagonals.
fn smat(v: &[f64], n: usize) -> ComplexMatrix<f64> {
    let mut m = ComplexMatrix::zeros(n, n);
    for q in 0..n {
        for p in 0..=q {
            let x = v[q * (q + 1) / 2 + p];
            let x = if p == q { x } else { x / std::f64::consts::SQRT_2 };
            m[(p, q)].re = x;
            m[(q, p)].re = x;
        }
    }
    m
}

/// `A^T z` for a CSC matrix.
fn at_times(a: &CscMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (0..a.n)
        .map(|col| {
            (a.colptr[col]..a.colptr[col + 1])
                .map(|k| a.nzval[k] * z[a.rowval[k]])
                .sum()
        })
        .collect()
}

fn verify_farkas(c: &Compiled, z: &[f64]) -> FarkasCertificate {
    let bz: f64 = c.b.iter().zip(z).map(|(b, z)| b * z).sum();
    if bz >= 0.0 || !bz.is_finite() {
        return FarkasCertificate {
            residual: f64::INFINITY,
            verified: false,
        };
    }
    let z: Vec<f64> = z.iter().map(|v| v / -bz).collect();
    let mut residual = at_times(&c.a, &z).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &(first, dim) in &c.psd_rows {
        let m = smat(&z[first..first + dim * (dim + 1) / 2], dim);
        residual += min_eigenvalue(&m).map(|l| (-l).max(0.0)).unwrap_or(f64::INFINITY);
    }
    FarkasCertificate {
        residual,
        verified: residual <= 1e-6,
    }
}

impl SolverBackend for ClarabelBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_block_dim: self.max_block_dim,
            warm_start: false,
            concurrent_solves: true,
        }
    }

    fn solve(&self, prog: &ConicProgram, tolerance: f64) -> Result<ConicSolution> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tolerance}")));
        }
        if let Some(dim) = prog.blocks().iter().filter_map(|b| b.kind.cone_dim()).max() {
            if dim > self.max_block_dim {
                return Err(Error::Capability(format!(
                    "PSD cone of side {dim} exceeds the backend limit {}",
                    self.max_block_dim
                )));
            }
        }
        let c = compile(prog);
        let n = prog.num_params();
        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .tol_gap_abs(tolerance)
            .tol_gap_rel(tolerance)
            .tol_feas(tolerance)
            .direct_solve_method(self.direct_solve_method.clone())
            .chordal_decomposition_enable(false)
            .build()
            .map_err(|e| Error::Solver(e.to_string()))?;
        let p = CscMatrix::zeros((n, n));
        let mut solver = DefaultSolver::new(&p, &c.q, &c.a, &c.b, &c.cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;

        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalLimit,
        };
        let farkas = matches!(
            sol.status,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible
        )
        .then(|| verify_farkas(&c, &sol.z));

        let dual_equalities = c
            .row_map
            .iter()
            .map(|m| m.map_or(0.0, |k| -sol.z[k]))
            .collect();
        debug_assert!(c.num_eq <= sol.z.len());

        Ok(ConicSolution {
            status,
            backend_status: format!("{:?}", sol.status),
            objective_value: sol.obj_val + prog.objective_offset(),
            dual_objective_value: sol.obj_val_dual + prog.objective_offset(),
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            gap: solver.info.gap_abs.min(solver.info.gap_rel),
            iterations: sol.iterations,
            solve_time: sol.solve_time,
            primal: sol.x.clone(),
            dual_equalities,
            farkas,
            shape: prog.shape(),
        })
    }
}
