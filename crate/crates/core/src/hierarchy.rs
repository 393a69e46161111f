//! Membership in the outer (symmetric-extension) sets `S^N`, `S^N_p` and the
//! inner sets obtained from them by the affine perturbation maps, plus witness
//! extraction from the dual of the membership program.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomp::haar_pure_state;
use crate::error::{Error, Result};
use crate::jacobi::epsilon_n;
use crate::linalg::superop::SuperOperator;
use crate::linalg::{
    kron, kron_vec, min_eigenvalue, operator_norm, psd_projection, trace_norm, BipartiteOperator,
    ComplexMatrix, Subsystem,
};
use crate::scalar::Real;
use crate::sdp::{
    BlockHandle, ClarabelBackend, ConicProgram, ConicSolution, EqualityHandle, SolveStatus, SolverBackend,
    DEFAULT_TOLERANCE,
};
use crate::symmetry::{ppt_cut, SymmetricSpaceMaps, DEFAULT_AMPLITUDE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    Outer,
    Inner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HierarchyLevel {
    pub n: usize,
    pub ppt: bool,
    pub side: Side,
}

impl HierarchyLevel {
    pub fn outer(n: usize, ppt: bool) -> Self {
        Self { n, ppt, side: Side::Outer }
    }

    pub fn inner(n: usize, ppt: bool) -> Self {
        Self { n, ppt, side: Side::Inner }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("hierarchy level needs N >= 1".into()));
        }
        Ok(())
    }

    /// Coefficients `(a, b)` of the perturbation map `T(s) = a s + b s_A (x) 1_B` on `d`-dimensional B.
    pub fn perturbation<T: Real>(&self, d: usize) -> Result<(T, T)> {
        self.validate()?;
        let (nf, df) = (T::lit(self.n as f64), T::lit(d as f64));
        if self.ppt {
            let eps = epsilon_n::<T>(d, self.n)?.epsilon;
            Ok((T::one() - eps, eps / df))
        } else {
            Ok((nf / (nf + df), T::one() / (nf + df)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Inside,
    Outside,
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct MembershipVerdict {
    pub verdict: Verdict,
    /// Witness gap `-tr(W rho)` for OUTSIDE, otherwise `-t*` (the identity shift
    /// the extension needed, sign flipped). In units of the trace-normalized input.
    pub margin: f64,
    /// Compressed extension of the tested operator (`rho` for OUTER, `sigma` for INNER).
    pub extension: Option<ComplexMatrix<f64>>,
    /// Entanglement witness for the tested operator, `||W||_inf = 1`.
    pub witness: Option<BipartiteOperator<f64>>,
    /// Operator fed to the outer program: `rho`, or its preimage under the inner map.
    pub tested: BipartiteOperator<f64>,
    pub status: SolveStatus,
    pub t_star: f64,
    /// Trace-norm distance between the marginal of the extension and the tested operator.
    pub reconstruction_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NormKind {
    Trace,
    Operator,
}

/// Applies the level's perturbation map `T`.
pub fn inner_map<T: Real>(sigma: &BipartiteOperator<T>, level: &HierarchyLevel) -> Result<BipartiteOperator<T>> {
    let (a, b) = level.perturbation::<T>(sigma.db())?;
    let mat = &sigma.mat().scale(a) + &sigma.marginal_a_times_identity().scale(b);
    BipartiteOperator::new(mat, sigma.da(), sigma.db())
}

/// The unique `sigma` with `T(sigma) = rho`; both maps fix the A-marginal.
pub fn inner_preimage<T: Real>(rho: &BipartiteOperator<T>, level: &HierarchyLevel) -> Result<BipartiteOperator<T>> {
    let (a, b) = level.perturbation::<T>(rho.db())?;
    let mat = (&rho.mat().clone() - &rho.marginal_a_times_identity().scale(b)).scale(T::one() / a);
    BipartiteOperator::new(mat, rho.da(), rho.db())
}

/// Smallest `tr(W (a a^dagger (x) b b^dagger))` over `samples` Haar-random pure product states.
pub fn witness_product_minimum(w: &BipartiteOperator<f64>, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let a = haar_pure_state::<f64>(w.da(), &mut rng);
        let b = haar_pure_state::<f64>(w.db(), &mut rng);
        let v = kron_vec(&a, &b);
        let wv = w.mat().mul_vec(&v);
        let val: f64 = v.iter().zip(&wv).map(|(x, y)| (x.conj() * y).re).sum();
        worst = worst.min(val);
    }
    worst
}

/// Symmetric-space maps at one level, with the sparse operators the programs use.
pub struct LevelMaps {
    pub sym: SymmetricSpaceMaps<f64>,
    pub da: usize,
    pub trace: SuperOperator<f64>,
    /// `-cut` and the cut, when the level imposes PPT.
    pub cut: Option<(SuperOperator<f64>, (usize, usize), usize)>,
}

impl LevelMaps {
    pub fn ext_dim(&self) -> usize {
        self.da * self.sym.sym_dim()
    }
}

/// Handles of one extension variable inside a program.
#[derive(Clone, Copy, Debug)]
pub struct ExtensionVar {
    pub lambda: BlockHandle,
    pub cut: Option<(BlockHandle, EqualityHandle)>,
}

/// Builds and solves hierarchy programs, caching symmetric-space maps per level.
pub struct Hierarchy<B: SolverBackend = ClarabelBackend> {
    pub backend: B,
    pub tolerance: f64,
    /// INSIDE/OUTSIDE need the decisive quantity to clear `margin_factor * tolerance`.
    pub margin_factor: f64,
    pub amplitude_cap: u128,
    cache: Mutex<HashMap<(usize, usize, usize, bool), Arc<LevelMaps>>>,
}

impl Default for Hierarchy<ClarabelBackend> {
    fn default() -> Self {
        Self::new(ClarabelBackend::default())
    }
}

impl<B: SolverBackend> Hierarchy<B> {
    pub fn new(backend: B) -> Self {
        Self {
            backend,
            tolerance: DEFAULT_TOLERANCE,
            margin_factor: 10.0,
            amplitude_cap: DEFAULT_AMPLITUDE_CAP,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn threshold(&self) -> f64 {
        self.margin_factor * self.tolerance
    }

    pub fn level_maps(&self, da: usize, db: usize, n: usize, ppt: bool) -> Result<Arc<LevelMaps>> {
        let key = (da, db, n, ppt);
        if let Some(m) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let cut = ppt_cut(n);
        let sym = SymmetricSpaceMaps::build_with_cap(db, n, &[cut], self.amplitude_cap)?;
        let trace = sym.trace_superop(da);
        let cut = if ppt {
            let op = sym.cut_superop(da, cut)?;
            let out = op.out_shape().0;
            Some((op.scale(-1.0), cut, out))
        } else {
            None
        };
        let maps = Arc::new(LevelMaps { sym, da, trace, cut });
        self.cache.lock().expect("cache lock").insert(key, maps.clone());
        Ok(maps)
    }

    /// Adds an extension block (real when `real`), plus its PPT cut block and link.
    pub fn add_extension(&self, prog: &mut ConicProgram, maps: &LevelMaps, real: bool) -> Result<ExtensionVar> {
        let dim = maps.ext_dim();
        let lambda = if real {
            prog.add_psd_variable(dim)?
        } else {
            prog.add_hermitian_psd_variable(dim)?
        };
        let cut = match &maps.cut {
            Some((neg_cut, _, out)) => {
                let y = if real {
                    prog.add_psd_variable(*out)?
                } else {
                    prog.add_hermitian_psd_variable(*out)?
                };
                let id = SuperOperator::identity((*out, *out));
                let eq = prog.add_linear_operator_equality(
                    &[(y, &id), (lambda, neg_cut)],
                    &ComplexMatrix::zeros(*out, *out),
                )?;
                Some((y, eq))
            }
            None => None,
        };
        Ok(ExtensionVar { lambda, cut })
    }

    pub fn solve(&self, prog: &ConicProgram) -> Result<ConicSolution> {
        self.backend.solve(prog, self.tolerance)
    }

    /// Optimal, or stopped short with residuals and gap still within `100 * tolerance`.
    pub fn accurate_enough(&self, sol: &ConicSolution) -> bool {
        let loose = 100.0 * self.tolerance;
        match sol.status {
            SolveStatus::Optimal => true,
            SolveStatus::NumericalLimit => {
                sol.primal_residual <= loose && sol.dual_residual <= loose && sol.gap.abs() <= loose
            }
            _ => false,
        }
    }

    /// Membership of `rho` in `S^N` / `S^N_p`.
    pub fn membership_outer(&self, rho: &BipartiteOperator<f64>, level: &HierarchyLevel) -> Result<MembershipVerdict> {
        level.validate()?;
        check_state_like(rho)?;
        self.outer_cone_test(rho, level)
    }

    /// Membership of `rho` in the inner set of the level: `rho = T(sigma)` with
    /// `sigma` in the outer set. INSIDE certifies separability of `rho`.
    pub fn membership_inner(&self, rho: &BipartiteOperator<f64>, level: &HierarchyLevel) -> Result<MembershipVerdict> {
        level.validate()?;
        check_state_like(rho)?;
        let sigma = inner_preimage(rho, level)?;
        self.outer_cone_test(&sigma, level)
    }

    /// `min t` s.t. `ptrace(lambda) - t 1/D = op / tr(op)`, `lambda >= 0` (and the cut
    /// block `>= 0` for PPT levels). No positivity is assumed of `op`.
    fn outer_cone_test(&self, op: &BipartiteOperator<f64>, level: &HierarchyLevel) -> Result<MembershipVerdict> {
        let (da, db) = (op.da(), op.db());
        let dim = da * db;
        let tr = op.trace();
        if !(tr.abs() > 1e-12) {
            return Err(Error::InvalidParameter("operator has zero trace".into()));
        }
        let target = op.mat().hermitian_part().scale(1.0 / tr);
        let maps = self.level_maps(da, db, level.n, level.ppt)?;
        let real = target.is_real(1e-14);

        let mut prog = self.backend.new_program();
        let t = prog.add_free_variable(1)?;
        let ext = self.add_extension(&mut prog, &maps, real)?;
        let shift = SuperOperator::from_triplets(
            (1, 1),
            (dim, dim),
            (0..dim).map(|i| (i * dim + i, 0, crate::scalar::re(-1.0 / dim as f64))),
        )?;
        let marg = prog.add_linear_operator_equality(&[(t, &shift), (ext.lambda, &maps.trace)], &target)?;
        prog.add_objective(&[(t, &ComplexMatrix::identity(1))])?;
        let sol = self.solve(&prog)?;

        let tested = op.clone();
        let mut verdict = MembershipVerdict {
            verdict: Verdict::Indeterminate,
            margin: f64::NAN,
            extension: None,
            witness: None,
            tested,
            status: sol.status,
            t_star: f64::NAN,
            reconstruction_residual: f64::NAN,
        };
        // Boundary instances often stop short of full accuracy; both certificates
        // below are checked independently, so an approximate point is still usable.
        if !sol.has_point() {
            return Ok(verdict);
        }
        let t_star = sol.primal[prog.layout(t)?.offset];
        verdict.t_star = t_star;
        verdict.margin = -t_star;

        // Witness from the marginal and cut multipliers, repaired to be exactly valid.
        let w_raw = sol.equality_dual(marg)?.scale(-1.0).hermitian_part();
        let mut z = maps.sym.compressed_partial_trace_adjoint(&w_raw, da)?;
        if let (Some((_, cut, _)), Some((_, cut_eq))) = (&maps.cut, ext.cut) {
            let g = psd_projection(&sol.equality_dual(cut_eq)?.scale(-1.0).hermitian_part());
            z = &z - &maps.sym.ppt_cut_adjoint(&g, da, *cut)?;
        }
        // ptrace^dagger(1_AB) is the identity on the compressed space.
        let delta = (-min_eigenvalue(&z)?).max(0.0);
        let w = &w_raw + &ComplexMatrix::identity(dim).scale(delta);
        let norm = operator_norm(&w);
        if norm > 0.0 {
            let w = w.scale(1.0 / norm);
            let value = w.trace_product(&target).re;
            if -value > self.threshold() {
                verdict.verdict = Verdict::Outside;
                verdict.margin = -value;
                verdict.witness = Some(BipartiteOperator::new(w, da, db)?);
                return Ok(verdict);
            }
        }

        if t_star <= self.threshold() {
            let lambda = sol.extract_complex(ext.lambda)?.matrix;
            let ext_dim = maps.ext_dim();
            let lambda = &lambda + &ComplexMatrix::identity(ext_dim).scale((-t_star).max(0.0) / ext_dim as f64);
            let marginal = maps.sym.compressed_partial_trace(&lambda, da)?;
            let residual = trace_norm(&(marginal.mat() - &target));
            verdict.reconstruction_residual = residual;
            let mut ok = residual <= 1e-6 && min_eigenvalue(&lambda)? >= -1e-6;
            if let Some((_, cut, _)) = &maps.cut {
                ok &= min_eigenvalue(&maps.sym.ppt_cut_operator(&lambda, da, *cut)?)? >= -1e-6;
            }
            if ok {
                verdict.verdict = Verdict::Inside;
                verdict.extension = Some(lambda.scale(tr));
            }
        }
        Ok(verdict)
    }

    /// Closest point `T(s)` of the inner set to the state `rho`, `s` in the outer set
    /// with unit trace; returns the point and the distance in the chosen norm.
    pub fn nearest_inner_point(
        &self,
        rho: &BipartiteOperator<f64>,
        level: &HierarchyLevel,
        norm: NormKind,
    ) -> Result<(BipartiteOperator<f64>, f64)> {
        level.validate()?;
        check_state_like(rho)?;
        let (da, db) = (rho.da(), rho.db());
        let dim = da * db;
        let maps = self.level_maps(da, db, level.n, level.ppt)?;
        let real = rho.mat().is_real(1e-14);
        let t_map = inner_superop(level, da, db)?.compose(&maps.trace)?;
        let target = rho.mat().hermitian_part();

        let mut prog = self.backend.new_program();
        let ext = self.add_extension(&mut prog, &maps, real)?;
        let ext_dim = maps.ext_dim();
        let trace = SuperOperator::from_triplets(
            (ext_dim, ext_dim),
            (1, 1),
            (0..ext_dim).map(|i| (0, i * ext_dim + i, crate::scalar::re(1.0))),
        )?;
        prog.add_linear_operator_equality(&[(ext.lambda, &trace)], &ComplexMatrix::identity(1))?;
        let psd = |prog: &mut ConicProgram| {
            if real {
                prog.add_psd_variable(dim)
            } else {
                prog.add_hermitian_psd_variable(dim)
            }
        };
        let id = SuperOperator::identity((dim, dim));
        let neg_id = id.scale(-1.0);
        let p = psd(&mut prog)?;
        let q = psd(&mut prog)?;
        match norm {
            NormKind::Trace => {
                // P - Q + T(s) = rho, minimize tr P + tr Q.
                prog.add_linear_operator_equality(&[(p, &id), (q, &neg_id), (ext.lambda, &t_map)], &target)?;
                let eye = ComplexMatrix::identity(dim);
                prog.add_objective(&[(p, &eye), (q, &eye)])?;
            }
            NormKind::Operator => {
                // P = t1 - rho + T(s) >= 0 and Q = t1 + rho - T(s) >= 0, minimize t.
                let t = prog.add_free_variable(1)?;
                let neg_eye = SuperOperator::from_triplets(
                    (1, 1),
                    (dim, dim),
                    (0..dim).map(|i| (i * dim + i, 0, crate::scalar::re(-1.0))),
                )?;
                let neg_t_map = t_map.scale(-1.0);
                prog.add_linear_operator_equality(&[(p, &id), (t, &neg_eye), (ext.lambda, &neg_t_map)], &target.scale(-1.0))?;
                prog.add_linear_operator_equality(&[(q, &id), (t, &neg_eye), (ext.lambda, &t_map)], &target)?;
                prog.add_objective(&[(t, &ComplexMatrix::identity(1))])?;
            }
        }
        let sol = self.solve(&prog)?;
        if !self.accurate_enough(&sol) {
            return Err(Error::Indeterminate(sol.backend_status));
        }
        let lambda = sol.extract_complex(ext.lambda)?.matrix;
        let point = BipartiteOperator::new(t_map.apply(&lambda)?, da, db)?;
        let diff = &target - point.mat();
        let distance = match norm {
            NormKind::Trace => trace_norm(&diff),
            NormKind::Operator => operator_norm(&diff),
        };
        Ok((point, distance))
    }
}

/// The perturbation map `T` as a sparse map on `(da db) x (da db)` matrices.
pub fn inner_superop(level: &HierarchyLevel, da: usize, db: usize) -> Result<SuperOperator<f64>> {
    let (a, b) = level.perturbation::<f64>(db)?;
    let dim = da * db;
    SuperOperator::from_linear_fn((dim, dim), (dim, dim), |x| {
        let op = BipartiteOperator::new(x.clone(), da, db).expect("shape");
        &x.scale(a) + &kron(&op.partial_trace(Subsystem::B), &ComplexMatrix::identity(db)).scale(b)
    })
}

/// Hermitian and PSD up to `1e-7` relative to the trace.
pub(crate) fn check_state_like(rho: &BipartiteOperator<f64>) -> Result<()> {
    let m = rho.mat();
    let scale = m.max_abs().max(1.0);
    let dev = m.hermiticity_deviation();
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let min = min_eigenvalue(&m.hermitian_part())?;
    if min < -1e-7 * rho.trace().abs().max(1.0) {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    Ok(())
}
