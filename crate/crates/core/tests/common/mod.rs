#![allow(dead_code)]

use dps_core::decomp::haar_pure_state;
use dps_core::{BipartiteOp, CMatrix, Complex};
use rand::Rng;
use rand_distr::StandardNormal;

/// `G G^dagger / tr` for a complex Ginibre `G`; full rank almost surely.
pub fn random_state(da: usize, db: usize, rng: &mut impl Rng) -> BipartiteOp {
    let dim = da * db;
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let rho = &g * &g.dagger();
    let tr = rho.trace().re;
    BipartiteOp::new(rho.scale(1.0 / tr).hermitian_part(), da, db).unwrap()
}

/// Convex mixture of `terms` Haar-random pure product states.
pub fn random_separable(da: usize, db: usize, terms: usize, rng: &mut impl Rng) -> BipartiteOp {
    let mut acc = CMatrix::zeros(da * db, da * db);
    let weights: Vec<f64> = (0..terms).map(|_| rng.gen::<f64>() + 0.1).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let a = CMatrix::projector(&haar_pure_state::<f64>(da, rng));
        let b = CMatrix::projector(&haar_pure_state::<f64>(db, rng));
        acc = &acc + &dps_core::linalg::kron(&a, &b).scale(w / total);
    }
    BipartiteOp::new(acc, da, db).unwrap()
}

/// Haar-random pure product state.
pub fn pure_product(da: usize, db: usize, rng: &mut impl Rng) -> BipartiteOp {
    random_separable(da, db, 1, rng)
}
