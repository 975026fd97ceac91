//! Floating point abstraction shared by every numeric module.
//!
//! Distances, route costs, QUBO coefficients and energies are all generic
//! over [`Scalar`]. `f64` is the working precision for benchmark runs; `f32`
//! is supported for memory-bound experiments and is exercised by the tests
//! with correspondingly looser tolerances.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Relative tolerance used when cached values are audited against a
    /// from-scratch recomputation.
    const AUDIT_RTOL: f64;

    /// Converts a finite `f64` literal or wire value.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("value representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Converts a count or a quantity.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count representable in scalar type")
    }

    /// `|a - b| <= AUDIT_RTOL * max(1, |a|, |b|)`.
    #[inline]
    fn approx_eq(a: Self, b: Self) -> bool {
        let scale = 1.0_f64.max(a.as_f64().abs()).max(b.as_f64().abs());
        (a - b).as_f64().abs() <= Self::AUDIT_RTOL * scale
    }
}

impl Scalar for f64 {
    const AUDIT_RTOL: f64 = 1e-9;
}

impl Scalar for f32 {
    const AUDIT_RTOL: f64 = 1e-4;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_eq_scales_with_magnitude() {
        assert!(f64::approx_eq(1000.0, 1000.0 + 1e-7));
        assert!(!f64::approx_eq(1.0, 1.0 + 1e-8));
        assert!(f32::approx_eq(500.0, 500.01));
    }
}
