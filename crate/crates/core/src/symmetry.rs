//! Bose-symmetric subspace of `H_B^{(x)N}`: occupation-number basis, the
//! compression isometry, the compressed `B^{N-1}` partial trace and the split
//! embeddings `Sym^N -> Sym^a (x) Sym^b` used for partial-transpose cuts.
//!
//! Extensions are stored compressed: an operator on `A (x) Sym^N` of size
//! `dA * symDim`, which makes Bose symmetry structural rather than a constraint.

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{kron, partial_transpose_factors, BipartiteOperator, ComplexMatrix};
use crate::linalg::superop::SuperOperator;
use crate::scalar::{re, Cx, Real};

/// Default cap on `d^N`, the number of amplitudes of one vector in `H_B^{(x)N}`.
pub const DEFAULT_AMPLITUDE_CAP: u128 = 10_000_000;

/// The partial-transpose cut `(a, b)` imposed at level `n`: `AB^a | B^b` with
/// `a = ceil(n/2)`, `b = floor(n/2)`. At `n = 1` that cut is empty, so the
/// plain `A | B` cut `(0, 1)` is used instead.
pub fn ppt_cut(n: usize) -> (usize, usize) {
    if n == 1 {
        (0, 1)
    } else {
        (n.div_ceil(2), n / 2)
    }
}

/// One coefficient of the compressed partial trace:
/// `tr_{B^{N-1}} |S_m><S_mp| ` has entry `weight` at `(i, j)`.
#[derive(Clone, Copy, Debug)]
pub struct TraceEntry<T> {
    pub m: usize,
    pub mp: usize,
    pub i: usize,
    pub j: usize,
    pub weight: T,
}

/// Isometry `W = (V_a (x) V_b)^dagger V_N` from `Sym^N` into `Sym^a (x) Sym^b`.
#[derive(Clone, Debug)]
pub struct SplitEmbedding<T: Real> {
    pub a: usize,
    pub b: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    pub matrix: ComplexMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct SymmetricSpaceMaps<T: Real> {
    d: usize,
    n: usize,
    occupations: Vec<Vec<usize>>,
    /// Sparse columns of the isometry: `(sequence index, amplitude)`.
    isometry_cols: Vec<Vec<(usize, T)>>,
    trace_map: Vec<TraceEntry<T>>,
    cuts: BTreeMap<(usize, usize), SplitEmbedding<T>>,
}

/// Occupation vectors of `n` bosons in `d` modes, lexicographically ascending.
pub fn occupations(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == d {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(d, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    rec(d, n, &mut Vec::with_capacity(d), &mut out);
    out
}

/// `binomial(d + n - 1, n)`, the dimension of `Sym^n(C^d)`.
pub fn sym_dim(d: usize, n: usize) -> usize {
    let mut acc: u128 = 1;
    for k in 1..=n as u128 {
        acc = acc * (d as u128 - 1 + k) / k;
    }
    acc as usize
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|x| (x as f64).ln()).sum()
}

/// `ln` of the number of sequences with occupation `occ`.
fn ln_multinomial(occ: &[usize]) -> f64 {
    let total: usize = occ.iter().sum();
    ln_factorial(total) - occ.iter().map(|&k| ln_factorial(k)).sum::<f64>()
}

impl<T: Real> SymmetricSpaceMaps<T> {
    pub fn build(d: usize, n: usize, cuts: &[(usize, usize)]) -> Result<Self> {
        Self::build_with_cap(d, n, cuts, DEFAULT_AMPLITUDE_CAP)
    }

    pub fn build_with_cap(d: usize, n: usize, cuts: &[(usize, usize)], cap: u128) -> Result<Self> {
        if d < 2 || n < 1 {
            return Err(Error::InvalidParameter(format!(
                "symmetric space needs d >= 2 and N >= 1 (got d={d}, N={n})"
            )));
        }
        let amplitudes = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if amplitudes > cap {
            return Err(Error::CapExceeded {
                d,
                n,
                amplitudes,
                cap,
            });
        }
        for &(a, b) in cuts {
            if a + b != n {
                return Err(Error::InvalidParameter(format!(
                    "cut ({a}, {b}) does not split N = {n}"
                )));
            }
        }

        let occs = occupations(d, n);
        let index: HashMap<Vec<usize>, usize> =
            occs.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect();

        let mut isometry_cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); occs.len()];
        let amps: Vec<T> = occs
            .iter()
            .map(|o| T::lit((-0.5 * ln_multinomial(o)).exp()))
            .collect();
        let total = amplitudes as usize;
        let mut digits = vec![0usize; n];
        let mut occ = vec![0usize; d];
        for seq in 0..total {
            let mut rest = seq;
            for k in (0..n).rev() {
                digits[k] = rest % d;
                rest /= d;
            }
            occ.iter_mut().for_each(|x| *x = 0);
            for &k in &digits {
                occ[k] += 1;
            }
            let m = index[&occ];
            isometry_cols[m].push((seq, amps[m]));
        }

        // tr_{B^{N-1}} |S_{r+e_i}><S_{r+e_j}| = sqrt(n_i n'_j) / N at (i, j), r in Sym^{N-1}.
        let mut trace_map = Vec::new();
        let nf = n as f64;
        for r in occupations(d, n - 1) {
            for i in 0..d {
                let mut ni = r.clone();
                ni[i] += 1;
                let m = index[&ni];
                for j in 0..d {
                    let mut nj = r.clone();
                    nj[j] += 1;
                    let mp = index[&nj];
                    let w = ((ni[i] * nj[j]) as f64).sqrt() / nf;
                    trace_map.push(TraceEntry {
                        m,
                        mp,
                        i,
                        j,
                        weight: T::lit(w),
                    });
                }
            }
        }

        let mut cut_map = BTreeMap::new();
        for &(a, b) in cuts {
            cut_map.insert((a, b), split_embedding(d, a, b, &occs)?);
        }

        Ok(Self {
            d,
            n,
            occupations: occs,
            isometry_cols,
            trace_map,
            cuts: cut_map,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sym_dim(&self) -> usize {
        self.occupations.len()
    }

    pub fn occupations(&self) -> &[Vec<usize>] {
        &self.occupations
    }

    pub fn trace_map(&self) -> &[TraceEntry<T>] {
        &self.trace_map
    }

    pub fn cuts(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cuts.keys().copied()
    }

    pub fn split_embedding(&self, cut: (usize, usize)) -> Result<&SplitEmbedding<T>> {
        self.cuts.get(&cut).ok_or(Error::UnregisteredCut(cut.0, cut.1))
    }

    /// Dense `d^N x symDim` isometry whose columns are the normalized symmetrized
    /// basis vectors.
    pub fn isometry(&self) -> ComplexMatrix<T> {
        let rows = self.d.pow(self.n as u32);
        let mut v = ComplexMatrix::zeros(rows, self.sym_dim());
        for (m, col) in self.isometry_cols.iter().enumerate() {
            for &(seq, amp) in col {
                v[(seq, m)] = re(amp);
            }
        }
        v
    }

    /// `P_sym^N = V V^dagger`.
    pub fn symmetric_projector(&self) -> ComplexMatrix<T> {
        let v = self.isometry();
        &v * &v.dagger()
    }

    /// Compressed coordinates of `phi^{(x)N}`, i.e. `V^dagger phi^{(x)N}`.
    pub fn power_vector(&self, phi: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        if phi.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for d = {}",
                phi.len(),
                self.d
            )));
        }
        Ok(self
            .occupations
            .iter()
            .map(|occ| {
                let mut z = re(T::lit((0.5 * ln_multinomial(occ)).exp()));
                for (k, &e) in occ.iter().enumerate() {
                    for _ in 0..e {
                        z = z * phi[k];
                    }
                }
                z
            })
            .collect())
    }

    /// `(I_A (x) V) lambda (I_A (x) V)^dagger`, the uncompressed extension.
    pub fn expand(&self, lambda: &ComplexMatrix<T>, da: usize) -> Result<ComplexMatrix<T>> {
        self.check_compressed(lambda, da)?;
        let lift = kron(&ComplexMatrix::identity(da), &self.isometry());
        lift.conjugate(lambda)
    }

    fn check_compressed(&self, lambda: &ComplexMatrix<T>, da: usize) -> Result<()> {
        let dim = da * self.sym_dim();
        if !lambda.is_square() || lambda.rows() != dim {
            return Err(Error::DimensionMismatch(format!(
                "compressed extension must be {dim}x{dim}, got {}x{}",
                lambda.rows(),
                lambda.cols()
            )));
        }
        Ok(())
    }

    /// `tr_{B^{N-1}}` of the uncompressed extension, computed in compressed form.
    pub fn compressed_partial_trace(
        &self,
        lambda: &ComplexMatrix<T>,
        da: usize,
    ) -> Result<BipartiteOperator<T>> {
        self.check_compressed(lambda, da)?;
        let (d, s) = (self.d, self.sym_dim());
        let mut out = ComplexMatrix::zeros(da * d, da * d);
        for a in 0..da {
            for a2 in 0..da {
                for e in &self.trace_map {
                    let v = lambda[(a * s + e.m, a2 * s + e.mp)];
                    if !v.is_zero() {
                        out[(a * d + e.i, a2 * d + e.j)] = out[(a * d + e.i, a2 * d + e.j)] + v * e.weight;
                    }
                }
            }
        }
        BipartiteOperator::new(out, da, d)
    }

    /// Adjoint of [`compressed_partial_trace`](Self::compressed_partial_trace)
    /// under the Hilbert-Schmidt inner product.
    pub fn compressed_partial_trace_adjoint(
        &self,
        w: &ComplexMatrix<T>,
        da: usize,
    ) -> Result<ComplexMatrix<T>> {
        let (d, s) = (self.d, self.sym_dim());
        if !w.is_square() || w.rows() != da * d {
            return Err(Error::DimensionMismatch("adjoint input shape".into()));
        }
        let mut out = ComplexMatrix::zeros(da * s, da * s);
        for a in 0..da {
            for a2 in 0..da {
                for e in &self.trace_map {
                    let v = w[(a * d + e.i, a2 * d + e.j)];
                    out[(a * s + e.m, a2 * s + e.mp)] = out[(a * s + e.m, a2 * s + e.mp)] + v * e.weight;
                }
            }
        }
        Ok(out)
    }

    /// Sparse form of the compressed partial trace for the conic layer.
    pub fn trace_superop(&self, da: usize) -> SuperOperator<T> {
        let (d, s) = (self.d, self.sym_dim());
        let (nin, nout) = (da * s, da * d);
        let mut triplets = Vec::with_capacity(da * da * self.trace_map.len());
        for a in 0..da {
            for a2 in 0..da {
                for e in &self.trace_map {
                    let o = (a * d + e.i) * nout + a2 * d + e.j;
                    let i = (a * s + e.m) * nin + a2 * s + e.mp;
                    triplets.push((o, i, re(e.weight)));
                }
            }
        }
        SuperOperator::from_triplets((nin, nin), (nout, nout), triplets).expect("trace map shape")
    }

    /// Partial transpose over the `Sym^b` factor of
    /// `(I_A (x) W) lambda (I_A (x) W)^dagger`. PSD exactly when the uncompressed
    /// extension is PPT across `AB^a | B^b`.
    pub fn ppt_cut_operator(
        &self,
        lambda: &ComplexMatrix<T>,
        da: usize,
        cut: (usize, usize),
    ) -> Result<ComplexMatrix<T>> {
        self.check_compressed(lambda, da)?;
        let emb = self.split_embedding(cut)?;
        let lift = kron(&ComplexMatrix::identity(da), &emb.matrix);
        let y = lift.conjugate(lambda)?;
        partial_transpose_factors(&y, &[da, emb.dim_a, emb.dim_b], &[false, false, true])
    }

    /// Adjoint of [`ppt_cut_operator`](Self::ppt_cut_operator).
    pub fn ppt_cut_adjoint(
        &self,
        y: &ComplexMatrix<T>,
        da: usize,
        cut: (usize, usize),
    ) -> Result<ComplexMatrix<T>> {
        let emb = self.split_embedding(cut)?;
        let pt = partial_transpose_factors(y, &[da, emb.dim_a, emb.dim_b], &[false, false, true])?;
        let lift = kron(&ComplexMatrix::identity(da), &emb.matrix);
        lift.dagger().conjugate(&pt)
    }

    /// Sparse form of [`ppt_cut_operator`](Self::ppt_cut_operator).
    pub fn cut_superop(&self, da: usize, cut: (usize, usize)) -> Result<SuperOperator<T>> {
        let emb = self.split_embedding(cut)?;
        let s = self.sym_dim();
        let (sa, sb) = (emb.dim_a, emb.dim_b);
        let nin = da * s;
        let nout = da * sa * sb;
        // Nonzeros of each column of W.
        let cols: Vec<Vec<(usize, usize, Cx<T>)>> = (0..s)
            .map(|m| {
                (0..sa * sb)
                    .filter_map(|r| {
                        let w = emb.matrix[(r, m)];
                        (!w.is_zero()).then_some((r / sb, r % sb, w))
                    })
                    .collect()
            })
            .collect();
        let mut triplets = Vec::new();
        for a in 0..da {
            for a2 in 0..da {
                for m in 0..s {
                    for mp in 0..s {
                        let i = (a * s + m) * nin + a2 * s + mp;
                        for &(p, q, w) in &cols[m] {
                            for &(p2, q2, w2) in &cols[mp] {
                                // Transpose the Sym^b indices: (p, q) x (p2, q2) -> (p, q2) x (p2, q).
                                let row = (a * sa + p) * sb + q2;
                                let col = (a2 * sa + p2) * sb + q;
                                triplets.push((row * nout + col, i, w * w2.conj()));
                            }
                        }
                    }
                }
            }
        }
        SuperOperator::from_triplets((nin, nin), (nout, nout), triplets)
    }

    /// Compressed extension `rho_A (x) (v v^dagger)` of `rho_A (x) phi` with
    /// `v = V^dagger phi^{(x)N}`.
    pub fn product_extension(&self, rho_a: &ComplexMatrix<T>, phi: &[Cx<T>]) -> Result<ComplexMatrix<T>> {
        let v = self.power_vector(phi)?;
        Ok(kron(rho_a, &ComplexMatrix::projector(&v)))
    }
}

fn split_embedding<T: Real>(
    d: usize,
    a: usize,
    b: usize,
    occs: &[Vec<usize>],
) -> Result<SplitEmbedding<T>> {
    let occ_a = occupations(d, a);
    let occ_b = occupations(d, b);
    let (sa, sb) = (occ_a.len(), occ_b.len());
    let mut w = ComplexMatrix::<T>::zeros(sa * sb, occs.len());
    for (m, n_occ) in occs.iter().enumerate() {
        let ln_n = ln_multinomial(n_occ);
        for (p, pa) in occ_a.iter().enumerate() {
            if pa.iter().zip(n_occ).any(|(x, y)| x > y) {
                continue;
            }
            let qb: Vec<usize> = n_occ.iter().zip(pa).map(|(y, x)| y - x).collect();
            let q = occ_b
                .binary_search(&qb)
                .expect("complement occupation is enumerated");
            // <S_p (x) S_q | S_n> = sqrt(M(p) M(q) / M(n)).
            let val = (0.5 * (ln_multinomial(pa) + ln_multinomial(&qb) - ln_n)).exp();
            w[(p * sb + q, m)] = re(T::lit(val));
        }
    }
    // W^dagger W = I holds exactly; re-orthonormalize only on drift.
    let gram = &w.dagger() * &w;
    if !gram.approx_eq(&ComplexMatrix::identity(occs.len()), T::lit(1e-12)) {
        gram_schmidt_columns(&mut w);
    }
    Ok(SplitEmbedding {
        a,
        b,
        dim_a: sa,
        dim_b: sb,
        matrix: w,
    })
}

fn gram_schmidt_columns<T: Real>(w: &mut ComplexMatrix<T>) {
    let (rows, cols) = (w.rows(), w.cols());
    for j in 0..cols {
        for k in 0..j {
            let dot: Cx<T> = (0..rows).map(|i| w[(i, k)].conj() * w[(i, j)]).sum();
            for i in 0..rows {
                w[(i, j)] = w[(i, j)] - w[(i, k)] * dot;
            }
        }
        let norm = (0..rows).map(|i| w[(i, j)].norm_sqr()).sum::<T>().sqrt();
        for i in 0..rows {
            w[(i, j)] = w[(i, j)] / norm;
        }
    }
}
