//! Monte Carlo separable decompositions from symmetric-extension certificates,
//! and their reading as measure-and-prepare strategies.
//!
//! For a compressed extension `lambda` of `sigma`, the integral over Haar pure
//! states of `(I (x) <v|) lambda (I (x) |v>) (x) phi phi^dagger`, with
//! `v = V^dagger phi^{(x)N}`, is proportional to the perturbed state `T(sigma)`.
//! Sampling that integral yields an explicit product-form ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{inner_map, HierarchyLevel};
use crate::linalg::{kron, max_eigenvalue, min_eigenvalue, psd_projection, trace_norm, BipartiteOperator, ComplexMatrix};
use crate::scalar::{Cx, Real};
use crate::states::haar_unitary;
use crate::symmetry::SymmetricSpaceMaps;

/// Samples per parallel chunk; fixed so results do not depend on the thread count.
const CHUNK: usize = 2048;

/// Normalized Haar-random pure state: a complex Gaussian vector, normalized.
pub fn haar_pure_state<T: Real>(d: usize, rng: &mut impl Rng) -> Vec<Cx<T>> {
    let mut v: Vec<Cx<T>> = (0..d)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Cx::new(T::lit(re), T::lit(im))
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    v.iter_mut().for_each(|z| *z = *z / norm);
    v
}

/// Seeded convenience wrapper around [`haar_pure_state`].
pub fn haar_pure_state_seeded<T: Real>(d: usize, seed: u64) -> Vec<Cx<T>> {
    haar_pure_state(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Clone, Debug)]
pub struct DecompositionTerm<T: Real> {
    pub weight: T,
    pub a_operator: ComplexMatrix<T>,
    /// Unit vector of the pure state on B.
    pub b_state: Vec<Cx<T>>,
}

impl<T: Real> DecompositionTerm<T> {
    pub fn b_projector(&self) -> ComplexMatrix<T> {
        ComplexMatrix::projector(&self.b_state)
    }
}

#[derive(Clone, Debug)]
pub struct SeparableDecomposition<T: Real> {
    pub terms: Vec<DecompositionTerm<T>>,
    pub reconstruction: BipartiteOperator<T>,
    pub target: BipartiteOperator<T>,
    pub residual_trace_norm: T,
}

impl<T: Real> SeparableDecomposition<T> {
    /// `sum_k weight_k aOperator_k`.
    pub fn a_marginal(&self) -> ComplexMatrix<T> {
        let da = self.reconstruction.da();
        self.terms.iter().fold(ComplexMatrix::zeros(da, da), |acc, t| &acc + &t.a_operator.scale(t.weight))
    }

    /// Term-wise check: weights nonnegative, A-operators PSD to `-1e-10`, B-states unit vectors.
    pub fn check_terms(&self) -> Result<()> {
        for t in &self.terms {
            if t.weight < T::zero() {
                return Err(Error::InvalidParameter("negative weight".into()));
            }
            let m = min_eigenvalue(&t.a_operator)?;
            if m < T::lit(-1e-10) {
                return Err(Error::NotPositive {
                    min_eigenvalue: m.to_f64_lossy(),
                });
            }
            let norm: T = t.b_state.iter().map(|z| z.norm_sqr()).sum();
            if (norm - T::one()).abs() > T::lit(1e-10) {
                return Err(Error::InvalidParameter("B state is not normalized".into()));
            }
        }
        Ok(())
    }
}

/// `(I_A (x) <v|) lambda (I_A (x) |v>)`.
fn contract<T: Real>(lambda: &ComplexMatrix<T>, v: &[Cx<T>], da: usize) -> ComplexMatrix<T> {
    let s = v.len();
    // lambda (I (x) v): column a2 gathers lambda[:, a2 s + m'] v[m'].
    let lv: Vec<Vec<Cx<T>>> = (0..da)
        .map(|a2| {
            (0..da * s)
                .map(|r| (0..s).map(|mp| lambda[(r, a2 * s + mp)] * v[mp]).sum())
                .collect()
        })
        .collect();
    let a = ComplexMatrix::from_fn(da, da, |x, y| (0..s).map(|m| v[m].conj() * lv[y][x * s + m]).sum());
    a.hermitian_part()
}

/// Samples `samples` terms of the Haar integral for the compressed extension `lambda`
/// of `sigma` and scales them so the reconstruction has the trace of the target
/// `T(sigma)`. States are drawn as the columns of Haar unitaries, which keeps each
/// state Haar distributed while balancing every batch.
///
/// For PPT levels only the symmetric-extension part of the certificate enters the
/// integral, which estimates the non-PPT image of `sigma`; the residual is still
/// reported against the PPT target.
pub fn decompose<T: Real>(
    lambda: &ComplexMatrix<T>,
    maps: &SymmetricSpaceMaps<T>,
    da: usize,
    level: &HierarchyLevel,
    samples: usize,
    seed: u64,
) -> Result<SeparableDecomposition<T>> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let d = maps.d();
    // Interior-point iterates can carry eigenvalues of order -1e-9; clip them so every term is PSD.
    let lambda = psd_projection(&lambda.hermitian_part());
    if lambda.max_abs() == T::zero() {
        return Err(Error::ZeroExtension);
    }
    let sigma = maps.compressed_partial_trace(&lambda, da)?;
    let target = inner_map(&sigma, level)?;

    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<DecompositionTerm<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let u = haar_unitary::<T>(d, &mut rng);
                for j in 0..d.min(count - out.len()) {
                    let phi = u.col(j);
                    let v = maps.power_vector(&phi).expect("state dimension");
                    out.push(DecompositionTerm {
                        weight: T::one(),
                        a_operator: contract(&lambda, &v, da),
                        b_state: phi,
                    });
                }
            }
            out
        })
        .collect();
    let mut terms: Vec<DecompositionTerm<T>> = parts.into_iter().flatten().collect();

    let raw_trace: T = terms.iter().map(|t| t.a_operator.trace().re).sum();
    if !(raw_trace > T::zero()) {
        return Err(Error::ZeroExtension);
    }
    let weight = target.trace() / raw_trace;
    let dim = da * d;
    let mut recon = ComplexMatrix::zeros(dim, dim);
    for t in &mut terms {
        t.weight = weight;
        recon = &recon + &kron(&t.a_operator, &t.b_projector()).scale(weight);
    }
    let residual = trace_norm(&(&recon - target.mat()));
    Ok(SeparableDecomposition {
        terms,
        reconstruction: BipartiteOperator::new(recon, da, d)?,
        target,
        residual_trace_norm: residual,
    })
}

/// POVM `{M_x}` and prepared states `{phi_x}`.
#[derive(Clone, Debug)]
pub struct MeasurePrepare<T: Real> {
    pub povm: Vec<ComplexMatrix<T>>,
    pub states: Vec<Vec<Cx<T>>>,
    /// Whether the last element is the completing `1 - sum M_x`, paired with `|0>`.
    pub closing_element: bool,
    /// Trace-norm distance of the sampled A-marginal from the identity, before completion.
    pub marginal_error: T,
}

impl<T: Real> MeasurePrepare<T> {
    pub fn completeness_error(&self) -> T {
        let da = self.povm.first().map_or(0, |m| m.rows());
        let sum = self.povm.iter().fold(ComplexMatrix::zeros(da, da), |acc, m| &acc + m);
        trace_norm(&(&sum - &ComplexMatrix::identity(da)))
    }
}

/// Reads a decomposition whose A-marginal is close to the identity as a
/// measure-and-prepare strategy. Elements are rescaled by `1 / lambda_max` of
/// their sum and completed with `1 - sum M_x`, so the POVM is exact.
pub fn as_measure_and_prepare<T: Real>(
    decomp: &SeparableDecomposition<T>,
    marginal_tolerance: T,
) -> Result<MeasurePrepare<T>> {
    let da = decomp.reconstruction.da();
    let db = decomp.reconstruction.db();
    let sum = decomp.a_marginal();
    let id = ComplexMatrix::identity(da);
    let err = trace_norm(&(&sum - &id));
    if err > marginal_tolerance {
        return Err(Error::MarginalNotIdentity {
            distance: err.to_f64_lossy(),
        });
    }
    let top = max_eigenvalue(&sum)?.max(T::one());
    let mut povm: Vec<ComplexMatrix<T>> =
        decomp.terms.iter().map(|t| t.a_operator.scale(t.weight / top)).collect();
    let mut states: Vec<Vec<Cx<T>>> = decomp.terms.iter().map(|t| t.b_state.clone()).collect();
    let rest = (&id - &sum.scale(T::one() / top)).hermitian_part();
    let closing = rest.trace().re > T::lit(1e-12);
    if closing {
        povm.push(psd_projection(&rest));
        let mut zero = vec![Cx::new(T::zero(), T::zero()); db];
        zero[0] = Cx::new(T::one(), T::zero());
        states.push(zero);
    }
    Ok(MeasurePrepare {
        povm,
        states,
        closing_element: closing,
        marginal_error: err,
    })
}

#[derive(Serialize)]
struct JsonMatrix {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct JsonVector {
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct JsonTerm {
    weight: f64,
    a_operator: JsonMatrix,
    b_state_vector: JsonVector,
}

fn json_matrix<T: Real>(m: &ComplexMatrix<T>) -> JsonMatrix {
    JsonMatrix {
        re: (0..m.rows()).map(|i| m.row(i).iter().map(|z| z.re.to_f64_lossy()).collect()).collect(),
        im: (0..m.rows()).map(|i| m.row(i).iter().map(|z| z.im.to_f64_lossy()).collect()).collect(),
    }
}

fn json_vector<T: Real>(v: &[Cx<T>]) -> JsonVector {
    JsonVector {
        re: v.iter().map(|z| z.re.to_f64_lossy()).collect(),
        im: v.iter().map(|z| z.im.to_f64_lossy()).collect(),
    }
}

/// JSON list of `{weight, aOperator: {re, im}, bStateVector: {re, im}}`.
pub fn decomposition_json<T: Real>(decomp: &SeparableDecomposition<T>) -> serde_json::Value {
    let terms: Vec<JsonTerm> = decomp
        .terms
        .iter()
        .map(|t| JsonTerm {
            weight: t.weight.to_f64_lossy(),
            a_operator: json_matrix(&t.a_operator),
            b_state_vector: json_vector(&t.b_state),
        })
        .collect();
    serde_json::to_value(terms).expect("serializable")
}

/// Strategy as JSON: POVM elements as `{re, im}` matrices paired with prepared states.
pub fn strategy_json<T: Real>(s: &MeasurePrepare<T>) -> serde_json::Value {
    let elements: Vec<serde_json::Value> = s
        .povm
        .iter()
        .zip(&s.states)
        .map(|(m, phi)| {
            serde_json::json!({
                "povmElement": json_matrix(m),
                "preparedState": json_vector(phi),
            })
        })
        .collect();
    serde_json::json!({
        "elements": elements,
        "closingElement": s.closing_element,
        "marginalError": s.marginal_error.to_f64_lossy(),
        "completenessError": s.completeness_error().to_f64_lossy(),
    })
}
