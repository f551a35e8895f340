//! Scalar abstraction for the dense linear algebra kernels.
//!
//! The matrix routines in [`crate::linalg`] are written once against
//! [`Scalar`] and instantiated for `f32` and `f64`. The higher-level
//! correlation machinery works in `f64` throughout.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real floating point type usable by the generic kernels.
pub trait Scalar: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    /// Magnitude below which an elimination pivot counts as exactly zero.
    fn pivot_floor() -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn pivot_floor() -> Self {
        1e-300
    }
}

impl Scalar for f32 {
    #[inline]
    fn pivot_floor() -> Self {
        // smallest normal f32 is ~1.2e-38
        1e-37
    }
}
