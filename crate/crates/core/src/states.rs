//! Test states: the three-qubit Datta family, the special unitary `U`, Haar
//! random unitaries and a few standard bipartite references.

use std::path::Path;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::decomp::haar_pure_state;
use crate::error::{Error, Result};
use crate::linalg::{kron, kron_vec, subsystem_permutation, trace_norm, BipartiteOperator, ComplexMatrix, Subsystem};
use crate::scalar::{Cx, Real};
use crate::symmetry::SymmetricSpaceMaps;

/// Bipartition of three qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DattaCut {
    /// Qubit 1 against qubits 2 and 3 (`dA = 2`, `dB = 4`).
    #[serde(rename = "1|23")]
    Cut1_23,
    /// Qubits 1 and 2 against qubit 3 (`dA = 4`, `dB = 2`).
    #[serde(rename = "12|3")]
    Cut12_3,
}

impl DattaCut {
    /// Qubit order placing the A side first, and the local dimensions.
    fn layout(self) -> ([usize; 3], usize, usize) {
        match self {
            DattaCut::Cut1_23 => ([0, 1, 2], 2, 4),
            DattaCut::Cut12_3 => ([0, 1, 2], 4, 2),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DattaState<T: Real> {
    pub n: usize,
    pub v: ComplexMatrix<T>,
    pub alpha: T,
    pub cut: DattaCut,
    pub as_bipartite: BipartiteOperator<T>,
}

fn unitarity_deviation<T: Real>(u: &ComplexMatrix<T>) -> T {
    let g = &u.dagger() * u;
    (&g - &ComplexMatrix::identity(u.rows())).max_abs()
}

/// `rho = (1/8) [1 + alpha (|0><1| (x) V + |1><0| (x) V^dagger)]` on three qubits,
/// arranged for the requested cut.
pub fn datta_state<T: Real>(v: &ComplexMatrix<T>, alpha: T, cut: DattaCut) -> Result<DattaState<T>> {
    if v.rows() != 4 || v.cols() != 4 {
        return Err(Error::DimensionMismatch("V must be a two-qubit unitary".into()));
    }
    let dev = unitarity_deviation(v);
    if dev > T::lit(1e-10) {
        return Err(Error::NotUnitary {
            deviation: dev.to_f64_lossy(),
        });
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut e01 = ComplexMatrix::<T>::zeros(2, 2);
    e01[(0, 1)] = Cx::new(T::one(), T::zero());
    let off = &kron(&e01, v) + &kron(&e01.transpose(), &v.dagger());
    let mat = (&ComplexMatrix::identity(8) + &off.scale(alpha)).scale(T::lit(0.125));
    let (order, da, db) = cut.layout();
    let p = subsystem_permutation::<T>(&[2, 2, 2], &order)?;
    let mat = p.conjugate(&mat)?;
    Ok(DattaState {
        n: 3,
        v: v.clone(),
        alpha,
        cut,
        as_bipartite: BipartiteOperator::hermitian(mat, da, db)?,
    })
}

/// `U = 2 P_sym - 1` on two qubits, which is the SWAP.
pub fn special_unitary_u<T: Real>() -> ComplexMatrix<T> {
    let p = SymmetricSpaceMaps::<T>::build(2, 2, &[])
        .expect("two-qubit symmetric space")
        .symmetric_projector();
    &p.scale(T::lit(2.0)) - &ComplexMatrix::identity(4)
}

/// Haar-random unitary: Gram-Schmidt on a complex Gaussian matrix. The positive
/// diagonal of the implied R factor makes the distribution exactly invariant.
pub fn haar_unitary<T: Real>(d: usize, rng: &mut impl Rng) -> ComplexMatrix<T> {
    let mut cols: Vec<Vec<Cx<T>>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut v: Vec<Cx<T>> = (0..d)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Cx::new(T::lit(re), T::lit(im))
            })
            .collect();
        // Two passes of modified Gram-Schmidt keep the columns orthonormal to roundoff.
        for _ in 0..2 {
            for u in &cols {
                let dot: Cx<T> = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x = *x - *y * dot);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        v.iter_mut().for_each(|z| *z = *z / norm);
        cols.push(v);
    }
    ComplexMatrix::from_fn(d, d, |i, j| cols[j][i])
}

/// Standard bipartite reference states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceState {
    /// `|Phi+><Phi+|` on two qubits.
    Bell,
    /// `p Phi+ + (1 - p) 1/d^2` on `d x d`.
    Isotropic { d: usize, p: f64 },
    /// `p P_anti / dim_anti + (1 - p) P_sym / dim_sym` on `d x d`.
    Werner { d: usize, p: f64 },
    /// A Haar-random pure product state on `dA x dB`.
    ProductRandom { da: usize, db: usize, seed: u64 },
}

impl ReferenceState {
    pub fn parse(name: &str, d: usize, p: f64, seed: u64) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "BELL" => Ok(Self::Bell),
            "ISOTROPIC" => Ok(Self::Isotropic { d, p }),
            "WERNER" => Ok(Self::Werner { d, p }),
            "PRODUCT_RANDOM" => Ok(Self::ProductRandom { da: d, db: d, seed }),
            other => Err(Error::InvalidParameter(format!("unknown reference state {other:?}"))),
        }
    }
}

fn max_entangled<T: Real>(d: usize) -> ComplexMatrix<T> {
    let s = T::one() / T::lit(d as f64).sqrt();
    let v: Vec<Cx<T>> = (0..d * d)
        .map(|k| if k / d == k % d { Cx::new(s, T::zero()) } else { Cx::new(T::zero(), T::zero()) })
        .collect();
    ComplexMatrix::projector(&v)
}

fn swap<T: Real>(d: usize) -> ComplexMatrix<T> {
    subsystem_permutation(&[d, d], &[1, 0]).expect("swap")
}

pub fn reference_state<T: Real>(which: ReferenceState) -> Result<BipartiteOperator<T>> {
    let check_p = |p: f64| {
        if (0.0..=1.0).contains(&p) {
            Ok(T::lit(p))
        } else {
            Err(Error::InvalidParameter(format!("mixing weight must lie in [0, 1], got {p}")))
        }
    };
    let check_d = |d: usize| {
        if d >= 2 {
            Ok(d)
        } else {
            Err(Error::InvalidParameter("local dimension must be at least 2".into()))
        }
    };
    match which {
        ReferenceState::Bell => BipartiteOperator::hermitian(max_entangled(2), 2, 2),
        ReferenceState::Isotropic { d, p } => {
            let (d, p) = (check_d(d)?, check_p(p)?);
            let noise = ComplexMatrix::identity(d * d).scale(T::one() / T::lit((d * d) as f64));
            let m = &max_entangled::<T>(d).scale(p) + &noise.scale(T::one() - p);
            BipartiteOperator::hermitian(m, d, d)
        }
        ReferenceState::Werner { d, p } => {
            let (d, p) = (check_d(d)?, check_p(p)?);
            let id = ComplexMatrix::<T>::identity(d * d);
            let sw = swap::<T>(d);
            let half = T::lit(0.5);
            let p_sym = (&id + &sw).scale(half);
            let p_anti = (&id - &sw).scale(half);
            let df = T::lit(d as f64);
            let m = &p_anti.scale(p * T::lit(2.0) / (df * (df - T::one())))
                + &p_sym.scale((T::one() - p) * T::lit(2.0) / (df * (df + T::one())));
            BipartiteOperator::hermitian(m, d, d)
        }
        ReferenceState::ProductRandom { da, db, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = haar_pure_state::<T>(check_d(da)?, &mut rng);
            let b = haar_pure_state::<T>(check_d(db)?, &mut rng);
            BipartiteOperator::hermitian(ComplexMatrix::projector(&kron_vec(&a, &b)), da, db)
        }
    }
}

/// One matrix entry in the JSON state format.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex<f64>> for JsonComplex {
    fn from(z: Complex<f64>) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<JsonComplex> for Complex<f64> {
    fn from(z: JsonComplex) -> Self {
        Complex::new(z.re, z.im)
    }
}

/// `{dA, dB, matrix: [[{re, im}, ...], ...]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFile {
    #[serde(rename = "dA")]
    pub da: usize,
    #[serde(rename = "dB")]
    pub db: usize,
    pub matrix: Vec<Vec<JsonComplex>>,
}

impl StateFile {
    pub fn from_operator(op: &BipartiteOperator<f64>) -> Self {
        let m = op.mat();
        Self {
            da: op.da(),
            db: op.db(),
            matrix: (0..m.rows()).map(|i| m.row(i).iter().map(|&z| z.into()).collect()).collect(),
        }
    }

    /// Validates shape and Hermiticity.
    pub fn to_operator(&self) -> Result<BipartiteOperator<f64>> {
        let n = self.da * self.db;
        if self.matrix.len() != n || self.matrix.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "state file matrix must be {n}x{n} for dA={}, dB={}",
                self.da, self.db
            )));
        }
        let data = self.matrix.iter().flatten().map(|&z| z.into()).collect();
        BipartiteOperator::hermitian(ComplexMatrix::new(n, n, data)?, self.da, self.db)
    }

    pub fn load(path: &Path) -> Result<BipartiteOperator<f64>> {
        let f: StateFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        f.to_operator()
    }

    pub fn save(op: &BipartiteOperator<f64>, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&Self::from_operator(op))?)?;
        Ok(())
    }
}

/// Negativity `(||rho^{T_B}||_1 - tr rho) / 2`; zero for PPT states.
pub fn negativity<T: Real>(rho: &BipartiteOperator<T>) -> T {
    let pt = rho.partial_transpose(Subsystem::B);
    (trace_norm(pt.mat()) - rho.trace()) / T::lit(2.0)
}
