//! Scalar abstraction shared by the numerical core.

use ndarray::NdFloat;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the GP and acquisition math is generic over.
///
/// Implemented for `f32` and `f64`. Constants are written as `f64` literals
/// and converted with [`Scalar::lit`].
pub trait Scalar:
    NdFloat + FloatConst + FromPrimitive + ToPrimitive + Serialize + DeserializeOwned + std::iter::Sum
{
    /// Converts an `f64` literal into `Self`.
    fn lit(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
}

/// Finite stand-in for `-inf` in log-space quantities.
///
/// Optimizers compare and difference acquisition values, so a true `-inf`
/// never enters arithmetic.
pub const LOG_FLOOR: f64 = -1e10;

#[inline]
pub(crate) fn log_floor<T: Scalar>() -> T {
    T::lit(LOG_FLOOR)
}
