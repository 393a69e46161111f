use num_traits::Zero;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};
use crate::scalar::{re, Cx, Real};

/// Sparse linear map between matrix spaces, acting on row-major `vec(X)`.
///
/// Row `k` of the map lists the `(input entry, coefficient)` pairs that sum to
/// output entry `k`.
#[derive(Clone, Debug)]
pub struct SuperOperator<T: Real> {
    in_shape: (usize, usize),
    out_shape: (usize, usize),
    rows: Vec<Vec<(usize, Cx<T>)>>,
}

impl<T: Real> SuperOperator<T> {
    pub fn from_rows(
        in_shape: (usize, usize),
        out_shape: (usize, usize),
        rows: Vec<Vec<(usize, Cx<T>)>>,
    ) -> Result<Self> {
        let n_in = in_shape.0 * in_shape.1;
        if rows.len() != out_shape.0 * out_shape.1 || rows.iter().flatten().any(|&(i, _)| i >= n_in) {
            return Err(Error::DimensionMismatch("super-operator rows".into()));
        }
        Ok(Self {
            in_shape,
            out_shape,
            rows,
        })
    }

    /// Collects `(output entry, input entry, coefficient)` triplets; duplicates add.
    pub fn from_triplets(
        in_shape: (usize, usize),
        out_shape: (usize, usize),
        triplets: impl IntoIterator<Item = (usize, usize, Cx<T>)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); out_shape.0 * out_shape.1];
        for (o, i, c) in triplets {
            if o >= rows.len() {
                return Err(Error::DimensionMismatch("triplet output index".into()));
            }
            rows[o].push((i, c));
        }
        for row in &mut rows {
            merge_row(row);
        }
        Self::from_rows(in_shape, out_shape, rows)
    }

    pub fn identity(shape: (usize, usize)) -> Self {
        let n = shape.0 * shape.1;
        Self {
            in_shape: shape,
            out_shape: shape,
            rows: (0..n).map(|k| vec![(k, re(T::one()))]).collect(),
        }
    }

    /// Builds the map by probing a complex-linear function with matrix units.
    pub fn from_linear_fn(
        in_shape: (usize, usize),
        out_shape: (usize, usize),
        f: impl Fn(&ComplexMatrix<T>) -> ComplexMatrix<T>,
    ) -> Result<Self> {
        let mut triplets = Vec::new();
        for i in 0..in_shape.0 {
            for j in 0..in_shape.1 {
                let mut unit = ComplexMatrix::zeros(in_shape.0, in_shape.1);
                unit[(i, j)] = re(T::one());
                let img = f(&unit);
                if (img.rows(), img.cols()) != out_shape {
                    return Err(Error::DimensionMismatch("probe output shape".into()));
                }
                for (k, &v) in img.as_slice().iter().enumerate() {
                    if !v.is_zero() {
                        triplets.push((k, i * in_shape.1 + j, v));
                    }
                }
            }
        }
        Self::from_triplets(in_shape, out_shape, triplets)
    }

    pub fn in_shape(&self) -> (usize, usize) {
        self.in_shape
    }

    pub fn out_shape(&self) -> (usize, usize) {
        self.out_shape
    }

    pub fn rows(&self) -> &[Vec<(usize, Cx<T>)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn apply(&self, x: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        if (x.rows(), x.cols()) != self.in_shape {
            return Err(Error::DimensionMismatch(format!(
                "map expects {:?}, got {}x{}",
                self.in_shape,
                x.rows(),
                x.cols()
            )));
        }
        let xs = x.as_slice();
        let data = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(i, c)| c * xs[i]).sum())
            .collect();
        ComplexMatrix::new(self.out_shape.0, self.out_shape.1, data)
    }

    /// `self o inner`.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if inner.out_shape != self.in_shape {
            return Err(Error::DimensionMismatch("composition shapes".into()));
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut acc = Vec::new();
                for &(mid, c) in row {
                    acc.extend(inner.rows[mid].iter().map(|&(i, d)| (i, c * d)));
                }
                merge_row(&mut acc);
                acc
            })
            .collect();
        Ok(Self {
            in_shape: inner.in_shape,
            out_shape: self.out_shape,
            rows,
        })
    }

    /// Hilbert-Schmidt adjoint: `<Y, self(X)> = <adjoint(Y), X>`.
    pub fn adjoint(&self) -> Self {
        let n_in = self.in_shape.0 * self.in_shape.1;
        let mut rows = vec![Vec::new(); n_in];
        for (o, row) in self.rows.iter().enumerate() {
            for &(i, c) in row {
                rows[i].push((o, c.conj()));
            }
        }
        for row in &mut rows {
            merge_row(row);
        }
        Self {
            in_shape: self.out_shape,
            out_shape: self.in_shape,
            rows,
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(i, c)| (i, c * s)).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.in_shape != other.in_shape || self.out_shape != other.out_shape {
            return Err(Error::DimensionMismatch("sum of maps with different shapes".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut r: Vec<_> = a.iter().chain(b).copied().collect();
                merge_row(&mut r);
                r
            })
            .collect();
        Ok(Self { rows, ..self.clone() })
    }
}

fn merge_row<T: Real>(row: &mut Vec<(usize, Cx<T>)>) {
    row.sort_by_key(|&(i, _)| i);
    let mut out: Vec<(usize, Cx<T>)> = Vec::with_capacity(row.len());
    for &(i, c) in row.iter() {
        match out.last_mut() {
            Some((j, d)) if *j == i => *d = *d + c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|(_, c)| !c.is_zero());
    *row = out;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{BipartiteOperator, Subsystem};
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, rng: &mut impl Rng) -> ComplexMatrix<f64> {
        ComplexMatrix::from_fn(r, c, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn hs(a: &ComplexMatrix<f64>, b: &ComplexMatrix<f64>) -> Cx<f64> {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn probed_partial_trace_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = SuperOperator::from_linear_fn((6, 6), (2, 2), |x| {
            BipartiteOperator::new(x.clone(), 2, 3).unwrap().partial_trace(Subsystem::B)
        })
        .unwrap();
        let x = random(6, 6, &mut rng);
        let direct = BipartiteOperator::new(x.clone(), 2, 3).unwrap().partial_trace(Subsystem::B);
        assert!(map.apply(&x).unwrap().approx_eq(&direct, 1e-14));
        assert_eq!(map.nnz(), 12);

        let y = random(2, 2, &mut rng);
        let lhs = hs(&y, &map.apply(&x).unwrap());
        let rhs = hs(&map.adjoint().apply(&y).unwrap(), &x);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn composition_and_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = SuperOperator::from_linear_fn((3, 3), (3, 3), |x| x.transpose()).unwrap();
        let tt = t.compose(&t).unwrap();
        let x = random(3, 3, &mut rng);
        assert!(tt.apply(&x).unwrap().approx_eq(&x, 0.0));
        let s = t.add(&SuperOperator::identity((3, 3))).unwrap().scale(0.5);
        let want = (&x + &x.transpose()).scale(0.5);
        assert!(s.apply(&x).unwrap().approx_eq(&want, 1e-15));
        assert!(t.compose(&SuperOperator::identity((2, 2))).is_err());
    }
}
