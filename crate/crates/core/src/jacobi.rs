//! Perturbation strength of the PPT inner set from Jacobi polynomial roots,
//! with a Bessel-zero cross-check of its `1/N^2` decay.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::eigen::symmetric_tridiagonal_eigenvalues;
use crate::scalar::Real;

/// `epsilon_N` together with the root it comes from.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonResult<T> {
    pub d: usize,
    pub n: usize,
    pub epsilon: T,
    /// Largest root of `P_degree^{(alpha, beta)}`; it minimizes `1 - x`.
    pub largest_root: T,
    pub degree: usize,
    pub alpha: i64,
    pub beta: i64,
}

/// Roots of the Jacobi polynomial `P_n^{(alpha, beta)}`, ascending, as the
/// eigenvalues of the symmetric tridiagonal matrix of the monic three-term
/// recurrence (Golub-Welsch).
pub fn jacobi_roots<T: Real>(n: usize, alpha: T, beta: T) -> Result<Vec<T>> {
    let minus_one = -T::one();
    if n == 0 || alpha <= minus_one || beta <= minus_one || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Jacobi roots need n >= 1 and alpha, beta > -1 (got n={n}, alpha={alpha}, beta={beta})"
        )));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let ab = alpha + beta;

    let diag: Vec<T> = (0..n)
        .map(|k| {
            if k == 0 {
                (beta - alpha) / (ab + two)
            } else {
                let kk = T::lit(k as f64);
                let s = two * kk + ab;
                (beta * beta - alpha * alpha) / (s * (s + two))
            }
        })
        .collect();
    let off: Vec<T> = (1..n)
        .map(|k| {
            let kk = T::lit(k as f64);
            let b = if k == 1 {
                four * (one + alpha) * (one + beta) / ((two + ab) * (two + ab) * (T::lit(3.0) + ab))
            } else {
                let s = two * kk + ab;
                four * kk * (kk + alpha) * (kk + beta) * (kk + ab) / (s * s * (s + one) * (s - one))
            };
            b.sqrt()
        })
        .collect();
    Ok(symmetric_tridiagonal_eigenvalues(&diag, &off))
}

/// `P_n^{(alpha, beta)}(x)` by the standard (non-monic) three-term recurrence.
pub fn jacobi_polynomial<T: Real>(n: usize, alpha: T, beta: T, x: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let ab = alpha + beta;
    let mut p_prev = one;
    if n == 0 {
        return p_prev;
    }
    let mut p = (alpha + one) + (ab + two) * (x - one) / two;
    for k in 2..=n {
        let kk = T::lit(k as f64);
        let s = two * kk + ab;
        let c0 = two * kk * (kk + ab) * (s - two);
        let c1 = (s - one) * (s * (s - two) * x + alpha * alpha - beta * beta);
        let c2 = two * (kk + alpha - one) * (kk + beta - one) * s;
        let next = (c1 * p - c2 * p_prev) / c0;
        p_prev = p;
        p = next;
    }
    p
}

/// `epsilon_N = d / (2(d-1)) * min{1 - x : P_{floor(N/2)+1}^{(d-2, N mod 2)}(x) = 0}`.
pub fn epsilon_n<T: Real>(d: usize, n: usize) -> Result<EpsilonResult<T>> {
    if d < 2 || n < 1 {
        return Err(Error::InvalidParameter(format!(
            "epsilon_N needs d >= 2 and N >= 1 (got d={d}, N={n})"
        )));
    }
    let degree = n / 2 + 1;
    let alpha = d as i64 - 2;
    let beta = (n % 2) as i64;
    let roots = jacobi_roots(degree, T::lit(alpha as f64), T::lit(beta as f64))?;
    let largest_root = *roots.last().expect("degree >= 1");
    let df = T::lit(d as f64);
    let epsilon = df / (T::lit(2.0) * (df - T::one())) * (T::one() - largest_root);
    Ok(EpsilonResult {
        d,
        n,
        epsilon,
        largest_root,
        degree,
        alpha,
        beta,
    })
}

/// Bessel function of the first kind `J_nu(x)` for integer order, by its power series.
pub fn bessel_j<T: Real>(nu: u32, x: T) -> T {
    let half = x / T::lit(2.0);
    // Leading term (x/2)^nu / nu!
    let mut term = T::one();
    for k in 1..=nu {
        term = term * half / T::lit(k as f64);
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term = -term * q / T::lit((k * (k + nu)) as f64);
        sum = sum + term;
        if term.abs() <= T::eps() * sum.abs() * T::lit(1e-2) && T::lit(k as f64) > half.abs() {
            break;
        }
        if k > 500 {
            break;
        }
    }
    sum
}

/// First positive zero `j_{nu,1}` of `J_nu`, bracketed by a forward scan from
/// `nu` and refined by bisection.
pub fn bessel_first_zero<T: Real>(nu: u32) -> T {
    let step = T::lit(0.05);
    let mut lo = T::lit(nu as f64).max(step);
    let mut f_lo = bessel_j(nu, lo);
    let mut hi = lo + step;
    let mut f_hi = bessel_j(nu, hi);
    while f_lo.signum() == f_hi.signum() {
        lo = hi;
        f_lo = f_hi;
        hi = hi + step;
        f_hi = bessel_j(nu, hi);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = bessel_j(nu, mid);
        if f_mid == T::zero() {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Large-`N` approximation `d j_{d-2,1}^2 / ((d-1) N^2)` of `epsilon_N`.
pub fn epsilon_asymptotic<T: Real>(d: usize, n: usize) -> T {
    let j = bessel_first_zero::<T>(d as u32 - 2);
    let df = T::lit(d as f64);
    let nf = T::lit(n as f64);
    df * j * j / ((df - T::one()) * nf * nf)
}
