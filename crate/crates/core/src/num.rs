//! Scalar abstraction shared by the DSP layer.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating point scalar usable by the DFT-based routines: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in generic code go through here.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 fits any Real")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `T::of(n as f64)`.
pub(crate) fn cast<T: Real>(n: usize) -> T {
    T::of(n as f64)
}
