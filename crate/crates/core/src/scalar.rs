//! Scalar abstraction shared by every numerical module.
//!
//! All matrix and distribution code is written against [`Real`], which is
//! implemented for `f32` and `f64`. Tolerances are expressed in `f64` and
//! converted with [`Real::lit`], so a tolerance tighter than the type's
//! resolution should be combined with [`Real::eps_floor`].

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::FromPrimitive;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub trait Real: RealField + Copy + FromPrimitive + Debug + Display + LowerExp + Send + Sync + 'static {
    /// Convert an `f64` literal or tolerance into this scalar.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// One standard normal draw.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// `max(tol, 64 * machine epsilon)`, so that f32 does not receive
    /// tolerances it cannot resolve.
    fn eps_floor(tol: f64) -> Self {
        let floor = 64.0 * Self::default_epsilon().as_f64();
        Self::lit(tol.max(floor))
    }

    /// Absolute value without the `Signed`/`ComplexField` method ambiguity.
    fn magnitude(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_floor_respects_precision() {
        assert_eq!(<f64 as Real>::eps_floor(1e-10), 1e-10);
        assert!(<f32 as Real>::eps_floor(1e-10) > 1e-6);
    }

    #[test]
    fn magnitude() {
        assert_eq!((-2.5f64).magnitude(), 2.5);
        assert_eq!(3.0f32.magnitude(), 3.0);
    }
}
