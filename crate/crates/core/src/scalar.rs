//! Floating point abstraction for the radio math.

use num_traits::{Float, FromPrimitive, NumCast};
use std::fmt::Debug;

/// floating point: f32 or f64
pub trait Scalar: Float + FromPrimitive + NumCast + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only if the type cannot represent it.
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
