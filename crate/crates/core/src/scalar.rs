//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the analysis is generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[allow(clippy::eq_op)]
    fn is_nan(self) -> bool {
        self != self
    }

    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }
}

impl Real for f32 {}
impl Real for f64 {}
