//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point type usable as the amplitude component type.
///
/// Implemented for `f32` and `f64`; the crate-root aliases fix `f64`, which is
/// the precision every documented tolerance assumes.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// The golden ratio computed from `√5` in the requested precision.
pub fn golden_ratio<T: Scalar>() -> T {
    (T::one() + T::of(5.0).sqrt()) / T::of(2.0)
}
