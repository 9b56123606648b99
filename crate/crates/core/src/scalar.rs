//! Numeric traits the engine is generic over.
//!
//! [`Weight`] is the ring-level bound used by the feature algebra, projection
//! and retrieval. It is satisfied by `f32`, `f64` and exact types such as
//! `num_rational::Ratio<i64>`. [`Scalar`] adds the floating-point operations
//! that normalization and training need.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, Neg};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// A feature weight: anything that forms a signed ordered ring.
pub trait Weight:
    Num + Clone + Neg<Output = Self> + AddAssign + PartialOrd + Debug + Display + Send + Sync + 'static
{
}

impl<T> Weight for T where
    T: Num
        + Clone
        + Neg<Output = T>
        + AddAssign
        + PartialOrd
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Floating-point weights: `f32` or `f64`.
pub trait Scalar: Weight + Float + FromPrimitive + ToPrimitive + FromStr + Sum + Copy {
    /// Lossy conversion from `f64` used for corpus statistics and configs.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to every float type")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
