//! Scalar abstraction for the numerical kernels.
//!
//! The simplex, affine policy evaluation and the uncertainty recursion are
//! written once over [`Scalar`] and instantiated for `f32`, `f64` and exact
//! rationals. Floating types compare against a small tolerance; exact types
//! compare against zero.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::Debug;

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + Send + Sync {
    /// Threshold below which a magnitude is treated as zero.
    fn tolerance() -> Self;

    /// Pivot threshold used by the simplex ratio test.
    fn pivot_tolerance() -> Self {
        Self::tolerance()
    }

    fn to_f64(&self) -> f64;

    fn from_f64_lossy(value: f64) -> Self;

    /// Flush values that are numerically indistinguishable from zero.
    fn snap(self) -> Self {
        self
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::tolerance()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }

    fn pivot_tolerance() -> Self {
        1e-10
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64_lossy(value: f64) -> Self {
        value
    }

    fn snap(self) -> Self {
        if self.abs() < 1e-13 {
            0.0
        } else {
            self
        }
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }

    fn pivot_tolerance() -> Self {
        1e-6
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn from_f64_lossy(value: f64) -> Self {
        value as f32
    }

    fn snap(self) -> Self {
        if self.abs() < 1e-7 {
            0.0
        } else {
            self
        }
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        Ratio::from_integer(BigInt::from(0))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(value: f64) -> Self {
        BigRational::from_float(value).expect("finite value")
    }
}

/// Exact rational scalar.
pub type Exact = BigRational;

/// Convert a slice of `f64` into any scalar type.
pub fn lift<S: Scalar>(values: &[f64]) -> Vec<S> {
    values.iter().map(|&v| S::from_f64_lossy(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Zero};

    #[test]
    fn exact_tolerance_is_zero() {
        assert!(Exact::tolerance().is_zero());
        let third = Exact::new(BigInt::from(1), BigInt::from(3));
        assert!(!third.is_negligible());
        assert!(
            (third.clone() * Exact::from_integer(BigInt::from(3)) - Exact::one()).is_negligible()
        );
    }

    #[test]
    fn float_snap_flushes_roundoff() {
        assert_eq!((0.1 + 0.2 - 0.3_f64).snap(), 0.0);
        assert_eq!(1e-3_f64.snap(), 1e-3);
        assert!(f32::tolerance() > 0.0);
    }

    #[test]
    fn lift_round_trips_dyadic_values() {
        let exact: Vec<Exact> = lift(&[0.5, -2.25]);
        assert_eq!(Scalar::to_f64(&exact[0]), 0.5);
        assert_eq!(Scalar::to_f64(&exact[1]), -2.25);
    }
}
