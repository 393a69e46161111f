//! Scalar abstraction shared by the dense linear algebra, the Jacobi root
//! finder and the state factories.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point type usable as the field of a [`ComplexMatrix`](crate::ComplexMatrix).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Machine epsilon, used to scale convergence thresholds.
    fn eps() -> Self {
        Float::epsilon()
    }

    /// Lossy conversion from `f64`; literal constants go through here.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] field.
pub type Cx<T> = Complex<T>;

#[cfg(test)]
#[inline]
pub(crate) fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> Cx<T> {
    Complex::new(x, T::zero())
}
