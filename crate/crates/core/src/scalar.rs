//! Scalar abstraction for the numeric core.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the decomposition is generic over (`f32`, `f64`).
///
/// Bundles the nalgebra field operations with the num-traits conversions the
/// solvers need for literals and reporting.
pub trait Real:
    RealField + Copy + Default + FromPrimitive + ToPrimitive + std::fmt::LowerExp
{
    /// Converts an `f64` literal into the scalar type.
    ///
    /// Panics if the value is not representable, which cannot happen for the
    /// finite literals used throughout this crate.
    fn of(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("literal representable in scalar type")
    }

    /// Converts the scalar to `f64` for reporting and serialization.
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar convertible to f64")
    }
}

impl<T> Real for T where
    T: RealField + Copy + Default + FromPrimitive + ToPrimitive + std::fmt::LowerExp
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(1.5f64.as_f64(), 1.5);
        assert_eq!(0.25f32.as_f64(), 0.25);
    }
}
