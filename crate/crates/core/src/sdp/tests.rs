use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::superop::SuperOperator;
use crate::linalg::{BipartiteOperator, Subsystem};

fn trace_map(n: usize) -> SuperOperator<f64> {
    SuperOperator::from_linear_fn((n, n), (1, 1), |m| ComplexMatrix::new(1, 1, vec![m.trace()]).unwrap()).unwrap()
}

fn ptrace_b(da: usize, db: usize) -> SuperOperator<f64> {
    SuperOperator::from_linear_fn((da * db, da * db), (da, da), |m| {
        BipartiteOperator::new(m.clone(), da, db).unwrap().partial_trace(Subsystem::B)
    })
    .unwrap()
}

fn random_psd(n: usize, rng: &mut impl Rng) -> ComplexMatrix<f64> {
    let g = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    g.matmul(&g.dagger()).unwrap()
}

#[test]
fn density_matrix_feasibility() {
    let backend = ClarabelBackend::default();
    let mut prog = backend.new_program();
    let x = prog.add_hermitian_psd_variable(3).unwrap();
    prog.add_linear_operator_equality(&[(x, &trace_map(3))], &ComplexMatrix::identity(1)).unwrap();
    let sol = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let e = sol.extract_complex(x).unwrap();
    assert!((e.matrix.trace().re - 1.0).abs() < 1e-7);
    assert!(e.residual < 1e-7);
    assert!(e.matrix.is_hermitian(1e-12));
}

#[test]
fn single_entry_block_has_one_degree_of_freedom() {
    let mut prog = ConicProgram::new();
    let x = prog.add_hermitian_psd_variable(1).unwrap();
    assert_eq!(prog.layout(x).unwrap().kind.num_params(), 1);
    assert_eq!(prog.layout(x).unwrap().kind.cone_dim(), Some(2));
}

#[test]
fn identity_instance() {
    let backend = ClarabelBackend::default();
    let mut prog = backend.new_program();
    let x = prog.add_hermitian_psd_variable(3).unwrap();
    prog.add_linear_operator_equality(&[(x, &SuperOperator::identity((3, 3)))], &ComplexMatrix::identity(3))
        .unwrap();
    let sol = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
    assert!(sol.extract_complex(x).unwrap().matrix.approx_eq(&ComplexMatrix::identity(3), 1e-9));
}

#[test]
fn minimum_trace_completion_matches_hand_solution() {
    // min tr X  s.t.  X_01 = e^{i theta}, X >= 0. Optimum X = [[1, z], [z*, 1]], value 2,
    // with multiplier W = [[0, z], [z*, 0]] saturating I - W >= 0.
    let theta = 0.7f64;
    let z = Complex64::from_polar(1.0, theta);
    let offdiag = SuperOperator::from_linear_fn((2, 2), (2, 2), |m| {
        let mut o = m.clone();
        o[(0, 0)] = Complex64::new(0.0, 0.0);
        o[(1, 1)] = Complex64::new(0.0, 0.0);
        o
    })
    .unwrap();
    let mut target = ComplexMatrix::zeros(2, 2);
    target[(0, 1)] = z;
    target[(1, 0)] = z.conj();

    let backend = ClarabelBackend::default();
    let mut prog = backend.new_program();
    let x = prog.add_hermitian_psd_variable(2).unwrap();
    let eq = prog.add_linear_operator_equality(&[(x, &offdiag)], &target).unwrap();
    assert_eq!(prog.rows().len(), 2);
    prog.add_objective(&[(x, &ComplexMatrix::identity(2))]).unwrap();
    let sol = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective_value - 2.0).abs() < 1e-7);

    let mut want = ComplexMatrix::identity(2);
    want[(0, 1)] = z;
    want[(1, 0)] = z.conj();
    assert!(sol.extract_complex(x).unwrap().matrix.approx_eq(&want, 1e-6));
    assert!(sol.equality_dual(eq).unwrap().approx_eq(&target, 1e-6));
}

#[test]
fn random_marginal_instance_satisfies_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let backend = ClarabelBackend::default();
    for _ in 0..3 {
        let rho = random_psd(4, &mut rng);
        let c = random_psd(4, &mut rng);
        let target = BipartiteOperator::new(rho, 2, 2).unwrap().partial_trace(Subsystem::B);
        let map = ptrace_b(2, 2);

        let mut prog = backend.new_program();
        let x = prog.add_hermitian_psd_variable(4).unwrap();
        let eq = prog.add_linear_operator_equality(&[(x, &map)], &target).unwrap();
        assert_eq!(prog.rows().len(), 4);
        prog.add_objective(&[(x, &c)]).unwrap();
        let sol = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.primal_residual <= DEFAULT_TOLERANCE);
        assert!(sol.dual_residual <= DEFAULT_TOLERANCE);
        assert!(sol.gap <= DEFAULT_TOLERANCE);

        let e = sol.extract_complex(x).unwrap();
        assert!(e.matrix.is_hermitian(1e-9));
        let reached = map.apply(&e.matrix).unwrap();
        assert!((&reached - &target).max_abs() < 1e-6);

        // Dual feasibility C - map^dagger(W) >= 0 and strong duality Re<W, target> = objective.
        let w = sol.equality_dual(eq).unwrap();
        let slack = &c - &map.adjoint().apply(&w).unwrap();
        assert!(min_eigenvalue(&slack).unwrap() > -1e-6);
        let dual_value = w.dagger().trace_product(&target).re;
        assert!((dual_value - sol.objective_value).abs() < 1e-6 * (1.0 + sol.objective_value.abs()));
    }
}

#[test]
fn infeasible_program_carries_verified_certificate() {
    let backend = ClarabelBackend::default();
    let mut prog = backend.new_program();
    let x = prog.add_hermitian_psd_variable(2).unwrap();
    prog.add_linear_operator_equality(&[(x, &trace_map(2))], &ComplexMatrix::identity(1).scale(-1.0))
        .unwrap();
    let sol = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
    let cert = sol.farkas.clone().expect("certificate");
    assert!(cert.verified, "residual {}", cert.residual);
    assert!(sol.extract_complex(x).is_err());
}

#[test]
fn unbounded_program() {
    let backend = ClarabelBackend::default();
    let mut prog = backend.new_program();
    let t = prog.add_free_variable(2).unwrap();
    let diff = SuperOperator::from_triplets(
        (2, 1),
        (1, 2),
        [(0, 0, Complex64::new(1.0, 0.0)), (0, 1, Complex64::new(-1.0, 0.0))],
    )
    .unwrap();
    prog.add_linear_operator_equality(&[(t, &diff)], &ComplexMatrix::zeros(1, 2)).unwrap();
    prog.add_objective(&[(t, &ComplexMatrix::new(2, 1, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap())])
        .unwrap();
    let sol = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

#[test]
fn repeated_solves_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = random_psd(6, &mut rng);
    let target = BipartiteOperator::new(rho, 2, 3).unwrap().partial_trace(Subsystem::B);
    let c = random_psd(6, &mut rng);
    let backend = ClarabelBackend::default();
    let mut prog = backend.new_program();
    let x = prog.add_hermitian_psd_variable(6).unwrap();
    prog.add_linear_operator_equality(&[(x, &ptrace_b(2, 3))], &target).unwrap();
    prog.add_objective(&[(x, &c)]).unwrap();
    let a = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
    let b = backend.solve(&prog, DEFAULT_TOLERANCE).unwrap();
    assert!((a.objective_value - b.objective_value).abs() < 1e-9);
}

#[test]
fn real_and_hermitian_blocks_agree_on_real_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
    let rho = g.matmul(&g.dagger()).unwrap();
    let c = ComplexMatrix::from_fn(4, 4, |i, j| Complex64::new(((i * 3 + j * 5) % 7) as f64 - 3.0, 0.0));
    let c = (&c + &c.transpose()).scale(0.5);
    let target = BipartiteOperator::new(rho, 2, 2).unwrap().partial_trace(Subsystem::B);
    let backend = ClarabelBackend::default();
    let value = |real: bool| {
        let mut prog = backend.new_program();
        let x = if real {
            prog.add_psd_variable(4).unwrap()
        } else {
            prog.add_hermitian_psd_variable(4).unwrap()
        };
        prog.add_linear_operator_equality(&[(x, &ptrace_b(2, 2))], &target).unwrap();
        prog.add_objective(&[(x, &c)]).unwrap();
        backend.solve(&prog, DEFAULT_TOLERANCE).unwrap().objective_value
    };
    assert!((value(true) - value(false)).abs() < 1e-6);
}

#[test]
fn qdldl_backend_matches_faer() {
    let mut prog = ConicProgram::new();
    let x = prog.add_hermitian_psd_variable(2).unwrap();
    prog.add_linear_operator_equality(&[(x, &trace_map(2))], &ComplexMatrix::identity(1)).unwrap();
    let c = ComplexMatrix::from_real_diag(&[2.0, 1.0]);
    prog.add_objective(&[(x, &c)]).unwrap();
    let faer = ClarabelBackend::default().solve(&prog, DEFAULT_TOLERANCE).unwrap();
    let qdldl = ClarabelBackend {
        direct_solve_method: "qdldl".into(),
        ..Default::default()
    }
    .solve(&prog, DEFAULT_TOLERANCE)
    .unwrap();
    assert!((faer.objective_value - 1.0).abs() < 1e-7);
    assert!((faer.objective_value - qdldl.objective_value).abs() < 1e-7);
}

#[test]
fn triplet_dump_lists_program() {
    let mut prog = ConicProgram::new();
    let x = prog.add_psd_variable(2).unwrap();
    prog.add_linear_operator_equality(&[(x, &trace_map(2))], &ComplexMatrix::identity(1)).unwrap();
    prog.add_objective(&[(x, &ComplexMatrix::identity(2))]).unwrap();
    let dump = prog.dump_triplets();
    assert!(dump.contains("block 0 PSD 2 offset 0 params 3"));
    assert!(dump.contains("rows 1"));
    assert_eq!(dump.lines().filter(|l| l.starts_with("a 0 ")).count(), 2);
    assert!(dump.lines().any(|l| l.starts_with("b 0 1.0")));
}
