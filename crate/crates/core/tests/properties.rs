mod common;

use dps_core::decomp::{haar_pure_state, haar_pure_state_seeded};
use dps_core::hierarchy::{inner_map, inner_preimage, HierarchyLevel};
use dps_core::jacobi::epsilon_n;
use dps_core::linalg::{
    eigenvalues, kron, min_eigenvalue, partial_trace_factors, partial_transpose_factors, real_embedding,
    subsystem_permutation, trace_norm,
};
use dps_core::states::{datta_state, haar_unitary, DattaCut};
use dps_core::symmetry::SymmetricSpaceMaps;
use dps_core::tasks::fidelity_upper_bound;
use dps_core::{BipartiteOp, CMatrix, Complex, Subsystem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

fn hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    gaussian(n, n, rng).hermitian_part()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_of_kron(seed: u64, da in 1usize..4, db in 1usize..4) {
        let mut r = rng(seed);
        let (a, b) = (gaussian(da, da, &mut r), gaussian(db, db, &mut r));
        let op = BipartiteOp::new(kron(&a, &b), da, db).unwrap();
        prop_assert!(op.partial_trace(Subsystem::B).approx_eq(&a.scale_cx(b.trace()), 1e-12));
        prop_assert!(op.partial_trace(Subsystem::A).approx_eq(&b.scale_cx(a.trace()), 1e-12));
    }

    #[test]
    fn partial_trace_matches_general_factor_routine(seed: u64, da in 1usize..4, db in 1usize..4) {
        let m = gaussian(da * db, da * db, &mut rng(seed));
        let op = BipartiteOp::new(m.clone(), da, db).unwrap();
        let keep_a = partial_trace_factors(&m, &[da, db], &[true, false]).unwrap();
        prop_assert!(op.partial_trace(Subsystem::B).approx_eq(&keep_a, 1e-12));
    }

    #[test]
    fn partial_transpose_is_index_swap(seed: u64, da in 1usize..4, db in 1usize..4) {
        let m = gaussian(da * db, da * db, &mut rng(seed));
        let op = BipartiteOp::new(m.clone(), da, db).unwrap();
        let pt = op.partial_transpose(Subsystem::B);
        for i in 0..da { for j in 0..db { for k in 0..da { for l in 0..db {
            prop_assert_eq!(pt.mat()[(i * db + j, k * db + l)], m[(i * db + l, k * db + j)]);
        }}}}
        let via_factors = partial_transpose_factors(&m, &[da, db], &[false, true]).unwrap();
        prop_assert!(pt.mat().approx_eq(&via_factors, 0.0));
        prop_assert!(pt.partial_transpose(Subsystem::B).mat().approx_eq(&m, 0.0));
    }

    #[test]
    fn partial_transpose_keeps_trace_and_hermiticity(seed: u64) {
        let h = hermitian(6, &mut rng(seed));
        let pt = BipartiteOp::new(h.clone(), 2, 3).unwrap().partial_transpose(Subsystem::A);
        prop_assert!(pt.mat().is_hermitian(1e-14));
        prop_assert!((pt.mat().trace() - h.trace()).norm() < 1e-12);
    }

    #[test]
    fn real_embedding_keeps_sign_of_min_eigenvalue(seed: u64, n in 1usize..5, shift in -2.0f64..2.0) {
        let h = &hermitian(n, &mut rng(seed)) + &CMatrix::identity(n).scale(shift);
        let lo = min_eigenvalue(&h).unwrap();
        prop_assume!(lo.abs() > 1e-9);
        let lo_real = min_eigenvalue(&real_embedding(&h).unwrap()).unwrap();
        prop_assert_eq!(lo > 0.0, lo_real > 0.0);
        prop_assert!((lo - lo_real).abs() < 1e-10);
    }

    #[test]
    fn compressed_trace_matches_uncompressed(seed: u64, case in 0usize..3) {
        let (d, n, da) = [(2, 2, 2), (2, 3, 2), (3, 2, 2)][case];
        let maps = SymmetricSpaceMaps::<f64>::build(d, n, &[]).unwrap();
        let k = da * maps.sym_dim();
        let lambda = hermitian(k, &mut rng(seed));
        let full = maps.expand(&lambda, da).unwrap();
        let mut dims = vec![da];
        dims.extend(std::iter::repeat_n(d, n));
        let mut keep = vec![true, true];
        keep.extend(std::iter::repeat_n(false, n - 1));
        let oracle = partial_trace_factors(&full, &dims, &keep).unwrap();
        let fast = maps.compressed_partial_trace(&lambda, da).unwrap();
        prop_assert!(fast.mat().approx_eq(&oracle, 1e-12));
    }

    #[test]
    fn inner_preimage_round_trip_fixes_a_marginal(
        seed: u64, n in 1usize..8, ppt: bool, da in 1usize..4, db in 2usize..4,
    ) {
        let level = HierarchyLevel::inner(n, ppt);
        let rho = common::random_state(da, db, &mut rng(seed));
        let pre = inner_preimage(&rho, &level).unwrap();
        prop_assert!(inner_map(&pre, &level).unwrap().mat().approx_eq(rho.mat(), 1e-12));
        prop_assert!(pre.partial_trace(Subsystem::B).approx_eq(&rho.partial_trace(Subsystem::B), 1e-12));
        let image = inner_map(&rho, &level).unwrap();
        prop_assert!((image.trace() - rho.trace()).abs() < 1e-12);
        prop_assert!(image.partial_trace(Subsystem::B).approx_eq(&rho.partial_trace(Subsystem::B), 1e-12));
    }

    #[test]
    fn inner_map_keeps_states_positive(seed: u64, n in 1usize..8, ppt: bool) {
        let rho = common::random_state(2, 3, &mut rng(seed));
        let image = inner_map(&rho, &HierarchyLevel::inner(n, ppt)).unwrap();
        prop_assert!(min_eigenvalue(image.mat()).unwrap() >= -1e-12);
    }

    #[test]
    fn epsilon_lies_in_unit_interval(d in 2usize..7, n in 1usize..41) {
        let eps = epsilon_n::<f64>(d, n).unwrap().epsilon;
        prop_assert!(eps > 0.0 && eps <= 1.0, "{}", eps);
        let next = epsilon_n::<f64>(d, n + 1).unwrap().epsilon;
        prop_assert!(next < eps);
    }

    #[test]
    fn fidelity_upper_bound_dominates(f in 0.5f64..1.0, n in 1usize..20, ppt: bool) {
        let up = fidelity_upper_bound(f, &HierarchyLevel::inner(n, ppt), 2).unwrap();
        prop_assert!(up >= f - 1e-15 && up <= 1.0);
    }

    #[test]
    fn haar_states_are_normalized(seed: u64, d in 1usize..9) {
        let v = haar_pure_state_seeded::<f64>(d, seed);
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_unitaries_are_unitary(seed: u64, d in 1usize..6) {
        let u = haar_unitary::<f64>(d, &mut rng(seed));
        prop_assert!((&u.dagger() * &u).approx_eq(&CMatrix::identity(d), 1e-12));
    }

    #[test]
    fn datta_cuts_share_the_global_spectrum(seed: u64, alpha in 0.0f64..1.0) {
        let v = haar_unitary::<f64>(4, &mut rng(seed));
        let mut a = eigenvalues(datta_state(&v, alpha, DattaCut::Cut12_3).unwrap().as_bipartite.mat());
        let mut b = eigenvalues(datta_state(&v, alpha, DattaCut::Cut1_23).unwrap().as_bipartite.mat());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

/// The symmetric projector commutes with every adjacent transposition of the copies.
#[test]
fn symmetric_projector_commutes_with_transpositions() {
    for (d, n) in [(2, 2), (2, 3), (3, 2), (2, 4), (3, 3)] {
        let maps = SymmetricSpaceMaps::<f64>::build(d, n, &[]).unwrap();
        let p = maps.symmetric_projector();
        let dims = vec![d; n];
        let mut average = CMatrix::zeros(p.rows(), p.cols());
        let mut perms = vec![(0..n).collect::<Vec<_>>()];
        for k in 0..n - 1 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.swap(k, k + 1);
            let s = subsystem_permutation::<f64>(&dims, &perm).unwrap();
            assert!((&(&s * &p) - &(&p * &s)).max_abs() < 1e-12, "d = {d}, N = {n}");
            perms.push(perm);
        }
        // Brute-force average over the full symmetric group.
        let all = permutations(n);
        for perm in &all {
            average = &average + &subsystem_permutation::<f64>(&dims, perm).unwrap();
        }
        let average = average.scale(1.0 / all.len() as f64);
        assert!(trace_norm(&(&average - &p)) < 1e-10, "d = {d}, N = {n}");
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Unitary invariance of the sampler: rotating every sample leaves the second moment alone.
#[test]
fn haar_second_moment_is_rotation_invariant() {
    let d = 3;
    let u = haar_unitary::<f64>(d, &mut rng(99));
    let mut r = rng(7);
    let samples = 20_000;
    let (mut plain, mut rotated) = (CMatrix::zeros(d * d, d * d), CMatrix::zeros(d * d, d * d));
    for _ in 0..samples {
        let v = haar_pure_state::<f64>(d, &mut r);
        let p = CMatrix::projector(&v);
        plain = &plain + &kron(&p, &p);
        let q = CMatrix::projector(&u.mul_vec(&v));
        rotated = &rotated + &kron(&q, &q);
    }
    let diff = trace_norm(&(&plain - &rotated)) / samples as f64;
    assert!(diff < 0.05, "{diff}");
}
