//! Scalar abstraction shared by every solver in the crate.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::ToPrimitive;

/// Real floating-point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Converts a count into `Self`.
    #[inline]
    fn count(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

pub type Cplx<T> = Complex<T>;
pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn c_real<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
