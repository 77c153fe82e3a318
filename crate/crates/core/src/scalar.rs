//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All math is written against [`Real`] so it runs on `f32` and `f64`
//! alike; complex values are `num_complex::Complex<F>`.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the elliptic kernel and everything built on it.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal into the working scalar.
#[inline]
pub fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("literal representable in scalar type")
}

/// Lossy conversion to `f64`, for reports and error payloads.
#[inline]
pub fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn c<F: Real>(re: f64, im: f64) -> Complex<F> {
    Complex::new(lit(re), lit(im))
}

#[inline]
pub fn i_unit<F: Real>() -> Complex<F> {
    Complex::new(F::zero(), F::one())
}

/// `2πi`, the Legendre constant.
#[inline]
pub fn two_pi_i<F: Real>() -> Complex<F> {
    Complex::new(F::zero(), F::TAU())
}

#[inline]
pub fn scale<F: Real>(z: Complex<F>, k: F) -> Complex<F> {
    Complex::new(z.re * k, z.im * k)
}

/// Largest modulus among a set of complex values.
pub fn max_norm<F: Real>(values: &[Complex<F>]) -> F {
    values.iter().fold(F::zero(), |m, v| m.max(v.norm()))
}

/// `a+bi` / `a-bi` with shortest round-trip reals; infinite parts print as `inf`.
pub fn fmt_complex<F: Real>(z: Complex<F>) -> String {
    if z.re.is_infinite() || z.im.is_infinite() {
        return "inf".to_string();
    }
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}
