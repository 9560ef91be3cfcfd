//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type the numeric core is generic over.
///
/// Implemented for `f32` and `f64`. `Display` must round-trip through
/// `FromStr`, which holds for both primitive floats and is what the text
/// artifacts (CSV, model files) rely on.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Floor applied to variances before they are used as divisors.
pub(crate) fn variance_floor<T: Scalar>() -> T {
    T::lit(1e-12)
}

/// Tolerance on the unit-simplex sum check.
pub(crate) fn simplex_tol<T: Scalar>() -> T {
    // f32 cannot hold a 1e-9 sum tolerance for long weight vectors.
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}
