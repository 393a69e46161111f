use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::matrix::{kron, ComplexMatrix};
use super::HERMITICITY_TOL;
use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

/// Tensor factor of `H_A (x) H_B`. `A` is the slower-varying (left) index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Square operator on `H_A (x) H_B` together with its local dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteOperator<T: Real> {
    mat: ComplexMatrix<T>,
    da: usize,
    db: usize,
    hermitian: bool,
}

impl<T: Real> BipartiteOperator<T> {
    pub fn new(mat: ComplexMatrix<T>, da: usize, db: usize) -> Result<Self> {
        check_dims(&mat, da, db)?;
        Ok(Self {
            mat,
            da,
            db,
            hermitian: false,
        })
    }

    /// Validates Hermiticity at the global tolerance and stores the exactly
    /// symmetrized matrix.
    pub fn hermitian(mat: ComplexMatrix<T>, da: usize, db: usize) -> Result<Self> {
        check_dims(&mat, da, db)?;
        let mat = mat.to_hermitian(T::lit(HERMITICITY_TOL))?;
        Ok(Self {
            mat,
            da,
            db,
            hermitian: true,
        })
    }

    pub fn product(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<Self> {
        if !a.is_square() || !b.is_square() {
            return Err(Error::DimensionMismatch("product factors must be square".into()));
        }
        let hermitian = a.is_hermitian(T::lit(HERMITICITY_TOL)) && b.is_hermitian(T::lit(HERMITICITY_TOL));
        let mut op = Self::new(kron(a, b), a.rows(), b.rows())?;
        if hermitian {
            op.mat = op.mat.hermitian_part();
            op.hermitian = true;
        }
        Ok(op)
    }

    pub fn mat(&self) -> &ComplexMatrix<T> {
        &self.mat
    }

    pub fn into_mat(self) -> ComplexMatrix<T> {
        self.mat
    }

    pub fn da(&self) -> usize {
        self.da
    }

    pub fn db(&self) -> usize {
        self.db
    }

    pub fn dim(&self) -> usize {
        self.da * self.db
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> T {
        self.mat.trace().re
    }

    /// Same operator with a new matrix of identical shape; keeps the Hermitian flag
    /// only if the new matrix passes the check.
    pub fn with_mat(&self, mat: ComplexMatrix<T>) -> Result<Self> {
        if self.hermitian {
            Self::hermitian(mat, self.da, self.db)
        } else {
            Self::new(mat, self.da, self.db)
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            mat: self.mat.scale(s),
            ..self.clone()
        }
    }

    pub fn partial_trace(&self, sys: Subsystem) -> ComplexMatrix<T> {
        let (da, db) = (self.da, self.db);
        let m = &self.mat;
        match sys {
            Subsystem::B => ComplexMatrix::from_fn(da, da, |a, a2| {
                (0..db).map(|j| m[(a * db + j, a2 * db + j)]).sum()
            }),
            Subsystem::A => ComplexMatrix::from_fn(db, db, |b, b2| {
                (0..da).map(|i| m[(i * db + b, i * db + b2)]).sum()
            }),
        }
    }

    /// Transposes the indices of one tensor factor. An involution that preserves
    /// trace and Hermiticity.
    pub fn partial_transpose(&self, sys: Subsystem) -> Self {
        let (da, db) = (self.da, self.db);
        let m = &self.mat;
        let mat = ComplexMatrix::from_fn(da * db, da * db, |r, c| {
            let (a, b) = (r / db, r % db);
            let (a2, b2) = (c / db, c % db);
            match sys {
                Subsystem::B => m[(a * db + b2, a2 * db + b)],
                Subsystem::A => m[(a2 * db + b, a * db + b2)],
            }
        });
        Self { mat, ..self.clone() }
    }

    /// `rho_A (x) 1_B`, the A-marginal broadcast back to the full space.
    pub fn marginal_a_times_identity(&self) -> ComplexMatrix<T> {
        kron(
            &self.partial_trace(Subsystem::B),
            &ComplexMatrix::identity(self.db),
        )
    }
}

fn check_dims<T: Real>(mat: &ComplexMatrix<T>, da: usize, db: usize) -> Result<()> {
    if da == 0 || db == 0 {
        return Err(Error::DimensionMismatch("local dimensions must be positive".into()));
    }
    if !mat.is_square() || mat.rows() != da * db {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix for local dimensions ({da}, {db})",
            mat.rows(),
            mat.cols()
        )));
    }
    Ok(())
}

/// Partial trace of `mat` on `(x)_k H_k` with local dimensions `dims`, keeping the
/// factors flagged in `keep` (in their original order).
pub fn partial_trace_factors<T: Real>(
    mat: &ComplexMatrix<T>,
    dims: &[usize],
    keep: &[bool],
) -> Result<ComplexMatrix<T>> {
    let total: usize = dims.iter().product();
    if dims.len() != keep.len() || !mat.is_square() || mat.rows() != total {
        return Err(Error::DimensionMismatch("factor dimensions do not match operator".into()));
    }
    let kept_dim: usize = dims.iter().zip(keep).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    let split = |mut idx: usize| -> (usize, usize) {
        // (kept index, traced index)
        let (mut kept, mut traced) = (0, 0);
        let (mut kscale, mut tscale) = (1, 1);
        for (d, &k) in dims.iter().zip(keep).rev() {
            let digit = idx % d;
            idx /= d;
            if k {
                kept += digit * kscale;
                kscale *= d;
            } else {
                traced += digit * tscale;
                tscale *= d;
            }
        }
        (kept, traced)
    };
    let parts: Vec<(usize, usize)> = (0..total).map(split).collect();
    for r in 0..total {
        let (kr, tr) = parts[r];
        for c in 0..total {
            let (kc, tc) = parts[c];
            if tr == tc {
                let v = mat[(r, c)];
                if !v.is_zero() {
                    out[(kr, kc)] = out[(kr, kc)] + v;
                }
            }
        }
    }
    Ok(out)
}

/// Transposes the factors flagged in `transpose`.
pub fn partial_transpose_factors<T: Real>(
    mat: &ComplexMatrix<T>,
    dims: &[usize],
    transpose: &[bool],
) -> Result<ComplexMatrix<T>> {
    let total: usize = dims.iter().product();
    if dims.len() != transpose.len() || !mat.is_square() || mat.rows() != total {
        return Err(Error::DimensionMismatch("factor dimensions do not match operator".into()));
    }
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = idx % dims[k];
            idx /= dims[k];
        }
        out
    };
    let join = |ds: &[usize]| ds.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x);
    let all: Vec<Vec<usize>> = (0..total).map(digits).collect();
    Ok(ComplexMatrix::from_fn(total, total, |r, c| {
        let mut rd = all[r].clone();
        let mut cd = all[c].clone();
        for k in 0..dims.len() {
            if transpose[k] {
                std::mem::swap(&mut rd[k], &mut cd[k]);
            }
        }
        mat[(join(&rd), join(&cd))]
    }))
}

/// Permutation matrix `P` with `P (x)_k |i_k> = (x)_k |i_{perm[k]}>`: output factor
/// `k` is input factor `perm[k]`.
pub fn subsystem_permutation<T: Real>(dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix<T>> {
    let n = dims.len();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation of {n} factors")));
    }
    let total: usize = dims.iter().product();
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut p = ComplexMatrix::zeros(total, total);
    for idx in 0..total {
        let mut digits = vec![0; n];
        let mut rest = idx;
        for k in (0..n).rev() {
            digits[k] = rest % dims[k];
            rest /= dims[k];
        }
        let out = perm
            .iter()
            .zip(&out_dims)
            .fold(0, |acc, (&src, &d)| acc * d + digits[src]);
        p[(out, idx)] = Cx::new(T::one(), T::zero());
    }
    Ok(p)
}

/// Real symmetric `2n x 2n` matrix `[[Re h, -Im h], [Im h, Re h]]`, stored with zero
/// imaginary parts. PSD exactly when `h` is; every eigenvalue appears twice.
pub fn real_embedding<T: Real>(h: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch("embedding needs a square matrix".into()));
    }
    let h = h.to_hermitian(T::lit(HERMITICITY_TOL))?;
    let n = h.rows();
    Ok(ComplexMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        let v = match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        Cx::new(v, T::zero())
    }))
}
