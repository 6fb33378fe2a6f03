//! Scalar abstraction shared by every module.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar (`f32` or `f64`) together with the default
/// tolerances that make sense at its precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Default tolerance for exact algebraic identities (unitarity, group laws).
    const ALGEBRAIC_TOL: f64;
    /// Default tolerance for quantities recovered by fitting.
    const FIT_TOL: f64;
    /// Default half-width of the boundary band of a defining function.
    const BOUNDARY_TOL: f64;
}

impl Real for f64 {
    const ALGEBRAIC_TOL: f64 = 1e-10;
    const FIT_TOL: f64 = 1e-8;
    const BOUNDARY_TOL: f64 = 1e-9;
}

impl Real for f32 {
    const ALGEBRAIC_TOL: f64 = 1e-4;
    const FIT_TOL: f64 = 1e-3;
    const BOUNDARY_TOL: f64 = 1e-4;
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Complex number with real and imaginary parts given as `f64`.
#[inline]
pub fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(lit(re), lit(im))
}

#[inline]
pub(crate) fn is_finite<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}
