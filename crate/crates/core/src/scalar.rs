//! Scalar abstraction shared by every module.
//!
//! All numerics are generic over a real field `T` (`f32` or `f64`); complex
//! quantities are `Complex<T>`. Concrete `f64` aliases live at the crate root.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, RealField};
use num_traits::ToPrimitive;

/// Real scalar the library is generic over.
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync + 'static {}

impl<T> Real for T where T: RealField + Copy + ToPrimitive + Send + Sync + 'static {}

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `e^{jθ}`
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub fn c64<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}

#[inline]
pub fn from_c64<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(lit(z.re), lit(z.im))
}

pub fn two_pi<T: Real>() -> T {
    T::two_pi()
}

/// Largest imaginary magnitude among the entries of `m`.
pub fn max_imag<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.im.abs()))
}

pub fn real_part<T: Real>(m: &CMatrix<T>) -> DMatrix<T> {
    m.map(|z| z.re)
}

pub fn to_complex<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(creal)
}

/// Frobenius norm of a complex matrix.
pub fn fro<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.modulus_squared()).sqrt()
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()))
}

/// Principal branch of the complex logarithm.
pub fn cln<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::ln(z)
}

pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::exp(z)
}

/// Small positive floor for norm denominators.
pub fn tiny<T: Real>() -> T {
    T::default_epsilon().powi(4)
}
