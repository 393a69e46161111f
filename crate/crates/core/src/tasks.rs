//! Robustness-of-entanglement sandwich bounds and state-estimation fidelity bounds.

use crate::decomp::{as_measure_and_prepare, decompose, MeasurePrepare, SeparableDecomposition};
use crate::error::{Error, Result};
use crate::hierarchy::{check_state_like, inner_map, inner_preimage, Hierarchy, HierarchyLevel, Side};
use crate::jacobi::epsilon_n;
use crate::linalg::superop::SuperOperator;
use crate::linalg::{kron, kron_vec, BipartiteOperator, ComplexMatrix, Subsystem};
use crate::scalar::Cx;
use crate::sdp::{SolveStatus, SolverBackend};

#[derive(Clone, Debug)]
pub struct RobustnessBounds {
    pub lower: f64,
    pub upper: f64,
    pub level_lower: HierarchyLevel,
    pub level_upper: HierarchyLevel,
    pub optimal_sigma_upper: Option<BipartiteOperator<f64>>,
}

/// Optimum of one robustness program and the optimal `s` (mapped by `T` on the inner side).
#[derive(Clone, Debug)]
pub struct RobustnessSolve {
    pub value: f64,
    pub sigma: Option<BipartiteOperator<f64>>,
    pub status: SolveStatus,
}

#[derive(Clone, Debug)]
pub struct FidelityBounds {
    pub f_tilde: f64,
    pub f_upper: f64,
    pub level: HierarchyLevel,
    /// `T(sigma)` at the optimum, with identity A-marginal.
    pub optimal_lambda: BipartiteOperator<f64>,
    /// Compressed extension of `sigma`, the input to [`decompose`].
    pub extension: ComplexMatrix<f64>,
}

fn require_side(level: &HierarchyLevel, side: Side) -> Result<()> {
    if level.side != side {
        return Err(Error::InvalidParameter(format!("expected a {side:?} level, got {:?}", level.side)));
    }
    Ok(())
}

/// `min tr(s)` over `s` with `s` and `s + target` both in the outer cone of `level`.
fn robustness_program<B: SolverBackend>(
    h: &Hierarchy<B>,
    target: &BipartiteOperator<f64>,
    level: &HierarchyLevel,
) -> Result<(f64, Option<ComplexMatrix<f64>>, SolveStatus)> {
    let (da, db) = (target.da(), target.db());
    let maps = h.level_maps(da, db, level.n, level.ppt)?;
    let real = target.mat().is_real(1e-14);
    let mut prog = h.backend.new_program();
    let s = h.add_extension(&mut prog, &maps, real)?;
    let shifted = h.add_extension(&mut prog, &maps, real)?;
    let neg_trace = maps.trace.scale(-1.0);
    prog.add_linear_operator_equality(
        &[(shifted.lambda, &maps.trace), (s.lambda, &neg_trace)],
        &target.mat().hermitian_part(),
    )?;
    prog.add_objective(&[(s.lambda, &ComplexMatrix::identity(maps.ext_dim()))])?;
    let sol = h.solve(&prog)?;
    match sol.status {
        _ if h.accurate_enough(&sol) => {
            let lambda = sol.extract_complex(s.lambda)?.matrix;
            let sigma = maps.sym.compressed_partial_trace(&lambda, da)?.into_mat();
            Ok((sol.objective_value.max(0.0), Some(sigma), sol.status))
        }
        SolveStatus::Infeasible => Ok((f64::INFINITY, None, sol.status)),
        _ => Err(Error::Indeterminate(sol.backend_status)),
    }
}

/// Lower bound on the robustness of entanglement from an outer level.
pub fn robustness_lower<B: SolverBackend>(
    h: &Hierarchy<B>,
    rho: &BipartiteOperator<f64>,
    level: &HierarchyLevel,
) -> Result<RobustnessSolve> {
    require_side(level, Side::Outer)?;
    check_state_like(rho)?;
    let (value, sigma, status) = robustness_program(h, rho, level)?;
    let sigma = sigma.map(|m| BipartiteOperator::new(m, rho.da(), rho.db())).transpose()?;
    Ok(RobustnessSolve { value, sigma, status })
}

/// Upper bound on the robustness from an inner level: `min tr(T(s1))` with `s1` and
/// `s1 + T^{-1}(rho)` in the outer cone. `T` preserves traces, so the objective is
/// `tr(s1)`. Returns `+inf` when the level admits no feasible point.
pub fn robustness_upper<B: SolverBackend>(
    h: &Hierarchy<B>,
    rho: &BipartiteOperator<f64>,
    level: &HierarchyLevel,
) -> Result<RobustnessSolve> {
    require_side(level, Side::Inner)?;
    check_state_like(rho)?;
    let preimage = inner_preimage(rho, level)?;
    let (value, sigma, status) = robustness_program(h, &preimage, level)?;
    let sigma = sigma
        .map(|m| inner_map(&BipartiteOperator::new(m, rho.da(), rho.db())?, level))
        .transpose()?;
    Ok(RobustnessSolve { value, sigma, status })
}

pub fn robustness_bounds<B: SolverBackend>(
    h: &Hierarchy<B>,
    rho: &BipartiteOperator<f64>,
    level_lower: &HierarchyLevel,
    level_upper: &HierarchyLevel,
) -> Result<RobustnessBounds> {
    let lower = robustness_lower(h, rho, level_lower)?;
    let upper = robustness_upper(h, rho, level_upper)?;
    Ok(RobustnessBounds {
        lower: lower.value,
        upper: upper.value,
        level_lower: *level_lower,
        level_upper: *level_upper,
        optimal_sigma_upper: upper.sigma,
    })
}

/// `max tr(rho_se Lambda)` over `Lambda = M(sigma)` with `sigma` in the outer cone and
/// identity A-marginal, where `M` is `T` for inner levels and the identity for outer ones.
fn fidelity_program<B: SolverBackend>(
    h: &Hierarchy<B>,
    rho_se: &BipartiteOperator<f64>,
    level: &HierarchyLevel,
) -> Result<(f64, BipartiteOperator<f64>, ComplexMatrix<f64>)> {
    check_state_like(rho_se)?;
    let (da, db) = (rho_se.da(), rho_se.db());
    let maps = h.level_maps(da, db, level.n, level.ppt)?;
    let real = rho_se.mat().is_real(1e-14);
    // T is self-adjoint, so the objective pulls back to ptrace^dagger(T(rho_se)).
    let pulled = match level.side {
        Side::Inner => inner_map(rho_se, level)?,
        Side::Outer => rho_se.clone(),
    };
    let c = maps.sym.compressed_partial_trace_adjoint(&pulled.mat().hermitian_part(), da)?.scale(-1.0);
    let dim = da * db;
    let trace_b = SuperOperator::from_linear_fn((dim, dim), (da, da), |x| {
        BipartiteOperator::new(x.clone(), da, db).expect("shape").partial_trace(Subsystem::B)
    })?
    .compose(&maps.trace)?;

    let mut prog = h.backend.new_program();
    let ext = h.add_extension(&mut prog, &maps, real)?;
    prog.add_linear_operator_equality(&[(ext.lambda, &trace_b)], &ComplexMatrix::identity(da))?;
    prog.add_objective(&[(ext.lambda, &c)])?;
    let sol = h.solve(&prog)?;
    if !h.accurate_enough(&sol) {
        return Err(Error::Indeterminate(sol.backend_status));
    }
    let lambda = sol.extract_complex(ext.lambda)?.matrix;
    let sigma = maps.sym.compressed_partial_trace(&lambda, da)?;
    let optimal = match level.side {
        Side::Inner => inner_map(&sigma, level)?,
        Side::Outer => sigma,
    };
    Ok((-sol.objective_value, optimal, lambda))
}

/// Upper end of the fidelity sandwich, clamped to 1; `d` is the dimension of B.
pub fn fidelity_upper_bound(f_tilde: f64, level: &HierarchyLevel, d: usize) -> Result<f64> {
    let df = d as f64;
    let gain = if level.ppt {
        let eps = epsilon_n::<f64>(d, level.n)?.epsilon;
        eps / (1.0 - eps)
    } else {
        df / level.n as f64
    };
    Ok((f_tilde + gain * (f_tilde - 1.0 / df)).min(1.0))
}

/// Inner fidelity `F~^N` (or `F~^N_p`) and the matching upper bound on `F`.
pub fn fidelity_inner<B: SolverBackend>(
    h: &Hierarchy<B>,
    rho_se: &BipartiteOperator<f64>,
    level: &HierarchyLevel,
) -> Result<FidelityBounds> {
    require_side(level, Side::Inner)?;
    let (f_tilde, optimal_lambda, extension) = fidelity_program(h, rho_se, level)?;
    Ok(FidelityBounds {
        f_tilde,
        f_upper: fidelity_upper_bound(f_tilde, level, rho_se.db())?,
        level: *level,
        optimal_lambda,
        extension,
    })
}

/// Outer relaxation of the fidelity program; an upper bound on `F`, exact for
/// `N = 1` with PPT when `dA dB <= 6`.
pub fn fidelity_outer<B: SolverBackend>(
    h: &Hierarchy<B>,
    rho_se: &BipartiteOperator<f64>,
    level: &HierarchyLevel,
) -> Result<f64> {
    require_side(level, Side::Outer)?;
    Ok(fidelity_program(h, rho_se, level)?.0)
}

/// Samples the separable decomposition of an inner fidelity optimum and reads it as a
/// measure-and-prepare strategy.
pub fn fidelity_strategy<B: SolverBackend>(
    h: &Hierarchy<B>,
    bounds: &FidelityBounds,
    samples: usize,
    seed: u64,
    marginal_tolerance: f64,
) -> Result<(SeparableDecomposition<f64>, MeasurePrepare<f64>)> {
    let (da, db) = (bounds.optimal_lambda.da(), bounds.optimal_lambda.db());
    let maps = h.level_maps(da, db, bounds.level.n, bounds.level.ppt)?;
    let dec = decompose(&bounds.extension, &maps.sym, da, &bounds.level, samples, seed)?;
    let strategy = as_measure_and_prepare(&dec, marginal_tolerance)?;
    Ok((dec, strategy))
}

/// One member of a state-estimation ensemble: prior `p`, the encoded state `psi_prime`
/// on A and the state `psi` to be reproduced on B, both as unit vectors.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub p: f64,
    pub psi_prime: Vec<Cx<f64>>,
    pub psi: Vec<Cx<f64>>,
}

/// `sum_i p_i Psi'_i (x) Psi_i`.
pub fn assemble_se_instance(ensemble: &[EnsembleMember]) -> Result<BipartiteOperator<f64>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    let (da, db) = (first.psi_prime.len(), first.psi.len());
    if da == 0 || db == 0 {
        return Err(Error::InvalidParameter("empty state vector".into()));
    }
    let total: f64 = ensemble.iter().map(|m| m.p).sum();
    if (total - 1.0).abs() > 1e-9 || ensemble.iter().any(|m| !(m.p >= 0.0)) {
        return Err(Error::InvalidParameter(format!("priors must be nonnegative and sum to 1 (sum {total})")));
    }
    let mut out = ComplexMatrix::zeros(da * db, da * db);
    for m in ensemble {
        if m.psi_prime.len() != da || m.psi.len() != db {
            return Err(Error::DimensionMismatch("ensemble members differ in dimension".into()));
        }
        for v in [&m.psi_prime, &m.psi] {
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("state vector has squared norm {norm}")));
            }
        }
        let v = kron_vec(&m.psi_prime, &m.psi);
        out = &out + &ComplexMatrix::projector(&v).scale(m.p);
    }
    BipartiteOperator::hermitian(out.hermitian_part(), da, db)
}

/// The six Pauli eigenstates with uniform prior, a qubit 2-design. Each state is
/// handed over as `copies` identical copies on A.
pub fn qubit_two_design_ensemble(copies: usize) -> Vec<EnsembleMember> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |a: f64, b: f64| Cx::new(a, b);
    let states = [
        vec![c(1.0, 0.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(1.0, 0.0)],
        vec![c(s, 0.0), c(s, 0.0)],
        vec![c(s, 0.0), c(-s, 0.0)],
        vec![c(s, 0.0), c(0.0, s)],
        vec![c(s, 0.0), c(0.0, -s)],
    ];
    states
        .iter()
        .map(|psi| {
            let psi_prime = (1..copies).fold(psi.clone(), |acc, _| kron_vec(&acc, psi));
            EnsembleMember {
                p: 1.0 / 6.0,
                psi_prime,
                psi: psi.clone(),
            }
        })
        .collect()
}

/// `1_A (x) rho_B / dA`, the uncorrelated instance.
pub fn uncorrelated_instance(da: usize, rho_b: &ComplexMatrix<f64>) -> Result<BipartiteOperator<f64>> {
    let a = ComplexMatrix::identity(da).scale(1.0 / da as f64);
    BipartiteOperator::hermitian(kron(&a, rho_b), da, rho_b.rows())
}
