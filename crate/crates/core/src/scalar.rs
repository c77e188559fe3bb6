//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable by the model, the discretization, and the solver.
///
/// Implemented for `f32`, `f64`, and [`Dual`](crate::dual::Dual) numbers built
/// on top of either.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("scalar type cannot represent an f64 literal")
    }

    /// Lossy conversion to `f64` (the real part for dual numbers).
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = a - two_pi * ((a + T::PI()) / two_pi).floor();
    // floor maps exactly -pi onto -pi; fold it to +pi
    if w <= -T::PI() {
        w = w + two_pi;
    }
    if w > T::PI() {
        w = w - two_pi;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        for &(a, w) in &[
            (0.0, 0.0),
            (PI, PI),
            (-PI, PI),
            (3.0 * PI, PI),
            (PI / 2.0 + 2.0 * PI, PI / 2.0),
            (-PI / 2.0 - 4.0 * PI, -PI / 2.0),
        ] {
            assert!((wrap_angle(a) - w).abs() < 1e-12, "wrap({a}) = {}", wrap_angle(a));
        }
    }

    #[test]
    fn literal_roundtrip_f32() {
        assert_eq!(<f32 as Scalar>::of(0.5), 0.5f32);
        assert_eq!(2.5f32.to_f64_lossy(), 2.5);
    }
}
