//! Floating point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; used for constants and config values.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
