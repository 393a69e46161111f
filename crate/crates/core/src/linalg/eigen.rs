//! Hermitian and symmetric-tridiagonal eigensolvers.

use num_traits::Zero;

use super::matrix::ComplexMatrix;
use super::HERMITICITY_TOL;
use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

/// Eigen-decomposition `H = Q diag(values) Q^dagger`, values ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    /// Unitary whose columns are the eigenvectors, in the order of `values`.
    pub vectors: ComplexMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// Rebuild `Q f(diag) Q^dagger` for a spectral function `f`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> ComplexMatrix<T> {
        let n = self.values.len();
        let q = &self.vectors;
        let fv: Vec<T> = self.values.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = Cx::zero();
            for k in 0..n {
                if fv[k] != T::zero() {
                    acc = acc + q[(i, k)] * q[(j, k)].conj() * fv[k];
                }
            }
            acc
        })
    }
}

/// Cyclic complex Jacobi eigensolver. The input is symmetrized first, so callers
/// must validate Hermiticity themselves when it matters.
pub fn hermitian_eigen<T: Real>(h: &ComplexMatrix<T>) -> HermitianEigen<T> {
    assert!(h.is_square(), "eigen-decomposition of a non-square matrix");
    let n = h.rows();
    let mut a = h.hermitian_part();
    let mut q = ComplexMatrix::<T>::identity(n);
    let scale = a.frobenius().max(T::min_positive_value());
    let two = T::lit(2.0);

    for sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= T::eps() * scale * T::lit(0.1) {
            break;
        }
        // Skip tiny pivots in the first sweeps only.
        let thresh = if sweep < 3 {
            off / T::lit((n * n) as f64)
        } else {
            T::zero()
        };
        for p in 0..n {
            for qi in (p + 1)..n {
                let g = a[(p, qi)];
                let r = g.norm();
                if r <= thresh || r == T::zero() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(qi, qi)].re;
                if r <= T::eps() * T::lit(1e-3) * (app.abs() + aqq.abs()) {
                    a[(p, qi)] = Cx::zero();
                    a[(qi, p)] = Cx::zero();
                    continue;
                }
                let e = g / r;
                let ebar = e.conj();
                let tau = (aqq - app) / (two * r);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // V = I except V_pp = c, V_pq = s, V_qp = -s*ebar, V_qq = c*ebar.
                let vqp = ebar * (-s);
                let vqq = ebar * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, qi)];
                    a[(k, p)] = akp * c + akq * vqp;
                    a[(k, qi)] = akp * s + akq * vqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(qi, k)];
                    a[(p, k)] = apk * c + aqk * vqp.conj();
                    a[(qi, k)] = apk * s + aqk * vqq.conj();
                }
                a[(p, qi)] = Cx::zero();
                a[(qi, p)] = Cx::zero();
                a[(p, p)] = Cx::new(a[(p, p)].re, T::zero());
                a[(qi, qi)] = Cx::new(a[(qi, qi)].re, T::zero());
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkq = q[(k, qi)];
                    q[(k, p)] = qkp * c + qkq * vqp;
                    q[(k, qi)] = qkp * s + qkq * vqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| q[(i, order[k])]);
    HermitianEigen { values, vectors }
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn eigenvalues<T: Real>(h: &ComplexMatrix<T>) -> Vec<T> {
    hermitian_eigen(h).values
}

fn checked<T: Real>(h: &ComplexMatrix<T>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not square",
            h.rows(),
            h.cols()
        )));
    }
    let dev = h.hermiticity_deviation();
    if dev > T::lit(HERMITICITY_TOL) {
        return Err(Error::NotHermitian {
            deviation: dev.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue<T: Real>(h: &ComplexMatrix<T>) -> Result<T> {
    checked(h)?;
    Ok(eigenvalues(h)[0])
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue<T: Real>(h: &ComplexMatrix<T>) -> Result<T> {
    checked(h)?;
    Ok(*eigenvalues(h).last().expect("non-empty"))
}

/// Schatten 1-norm of a Hermitian matrix.
pub fn trace_norm<T: Real>(h: &ComplexMatrix<T>) -> T {
    eigenvalues(h).into_iter().map(|x| x.abs()).sum()
}

/// Spectral norm of a Hermitian matrix.
pub fn operator_norm<T: Real>(h: &ComplexMatrix<T>) -> T {
    eigenvalues(h)
        .into_iter()
        .fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Closest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn psd_projection<T: Real>(h: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    hermitian_eigen(h).apply(|x| x.max(T::zero()))
}

/// Eigenvalues of the real symmetric tridiagonal matrix with diagonal `diag`
/// and sub-diagonal `off` (`off.len() + 1 == diag.len()`), ascending.
/// Implicit QL with Wilkinson shifts.
pub fn symmetric_tridiagonal_eigenvalues<T: Real>(diag: &[T], off: &[T]) -> Vec<T> {
    let n = diag.len();
    assert!(n == 0 || off.len() + 1 == n, "sub-diagonal length");
    let mut d = diag.to_vec();
    let mut e: Vec<T> = off.iter().copied().chain(std::iter::once(T::zero())).collect();
    let two = T::lit(2.0);
    let hypot = |a: T, b: T| a.hypot(b);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::eps() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = hypot(g, T::one());
            let sgn = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sgn);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}
