//! Scalar abstraction shared by every numerical module.
//!
//! All math is generic over [`Real`], implemented for `f32` and `f64`.
//! Complex quantities use [`num_complex::Complex`] and dynamically sized
//! `nalgebra` matrices.

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FloatConst, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FloatConst + ToPrimitive {
    /// Converts an `f64` literal or measurement into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Widens to `f64` (exact for both supported types).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar.
pub type C<T> = Complex<T>;
/// Dynamically sized complex matrix.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Dynamically sized complex column vector.
pub type CVector<T> = DVector<Complex<T>>;

/// `exp(j·phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> C<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub fn real<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// Squared ℓ₂ norm of a complex vector.
#[inline]
pub fn norm_sqr<T: Real>(v: &CVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
}

/// Squared Frobenius norm of a complex matrix.
#[inline]
pub fn frob_sqr<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: impl IntoIterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
