//! Tail probabilities of `Q = Σ w_i u_i²` with `u_i` i.i.d. standard normal
//! and `w_i > 0`.
//!
//! [`QuadFormDist::tail_imhof`] inverts the characteristic function along the
//! real axis and is accurate to about `1e-8` in absolute terms. Far tails are
//! handled by [`QuadFormDist::log_tail`], which integrates along a vertical
//! line through the saddlepoint and is accurate in relative terms down to
//! probabilities well below `f64::MIN_POSITIVE`.
//!
//! Evaluation is carried out in `f64` whatever the scalar type.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::{half_line, HalfLine};
use crate::scalar::Real;

/// Weights below this fraction of the largest one are dropped.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Absolute accuracy target of the real-axis inversion.
pub const IMHOF_ABS_TOL: f64 = 1e-8;
/// Below this the hybrid tail switches to the saddlepoint contour.
pub const CONTOUR_SWITCH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadFormDist<T: Real = f64> {
    weights: Vec<T>,
    w: Vec<f64>,
    sum: f64,
    sum_sq: f64,
    max: f64,
}

impl<T: Real> QuadFormDist<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter {
                name: "weights",
                value: f64::NAN,
                reason: "at least one weight is required",
            });
        }
        if weights.iter().any(|w| !w.is_finite_value()) {
            return Err(Error::NonFinite("quadratic form weights"));
        }
        if let Some(neg) = weights.iter().find(|&&w| w < T::zero()) {
            return Err(Error::InvalidParameter {
                name: "weights",
                value: neg.as_f64(),
                reason: "weights must be non-negative",
            });
        }
        let max = weights.iter().fold(0.0f64, |m, w| m.max(w.as_f64()));
        if max <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "weights",
                value: 0.0,
                reason: "at least one weight must be positive",
            });
        }
        let weights: Vec<T> = weights
            .into_iter()
            .filter(|w| w.as_f64() >= WEIGHT_FLOOR * max)
            .collect();
        let w: Vec<f64> = weights.iter().map(|x| x.as_f64()).collect();
        Ok(Self {
            sum: w.iter().sum(),
            sum_sq: w.iter().map(|x| x * x).sum(),
            max,
            weights,
            w,
        })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn mean(&self) -> T {
        T::lit(self.sum)
    }

    pub fn variance(&self) -> T {
        T::lit(2.0 * self.sum_sq)
    }

    pub fn max_weight(&self) -> T {
        T::lit(self.max)
    }

    fn check_x(x: T) -> Result<f64> {
        if !x.is_finite_value() {
            return Err(Error::NonFinite("tail threshold"));
        }
        Ok(x.as_f64())
    }

    /// `P[Q > x]` by real-axis inversion of the characteristic function.
    pub fn tail_imhof(&self, x: T) -> Result<T> {
        let x = Self::check_x(x)?;
        if x <= 0.0 {
            return Ok(T::one());
        }
        Ok(T::lit(self.imhof(x)?))
    }

    fn imhof(&self, x: f64) -> Result<f64> {
        let w = &self.w;
        let integrand = |u: f64| {
            let mut theta = -0.5 * x * u;
            let mut log_rho = 0.0;
            for &wi in w {
                let wu = wi * u;
                theta += 0.5 * wu.atan();
                log_rho += 0.25 * wu.mul_add(wu, 1.0).ln();
            }
            theta.sin() / (u * log_rho.exp())
        };
        let envelope = |u: f64| {
            let log_rho: f64 = w.iter().map(|&wi| 0.25 * (wi * u).mul_add(wi * u, 1.0).ln()).sum();
            1.0 / (u * log_rho.exp())
        };
        let cfg = HalfLine {
            panel: 2.0 * PI / x,
            abs_tol: 1e-2 * IMHOF_ABS_TOL,
            rel_tol: 0.0,
            envelope_tol: 1e-10,
            max_panels: 200_000,
        };
        let est = half_line(integrand, envelope, &cfg)?;
        Ok((0.5 + est.value / PI).clamp(0.0, 1.0))
    }

    /// Saddlepoint of `K(s) − s x − ln s` on `(0, 1 / (2 w_max))`.
    fn saddlepoint(&self, x: f64) -> f64 {
        let slope = |c: f64| self.w.iter().map(|&wi| wi / (1.0 - 2.0 * wi * c)).sum::<f64>() - x - 1.0 / c;
        let mut lo = 0.0;
        let mut hi = 0.5 / self.max;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn log_tail_contour(&self, x: f64) -> Result<f64> {
        let c = self.saddlepoint(x);
        let a: Vec<f64> = self.w.iter().map(|&wi| 1.0 - 2.0 * wi * c).collect();
        let ratio: Vec<f64> = self.w.iter().zip(&a).map(|(&wi, &ai)| 2.0 * wi / ai).collect();
        let cgf = -0.5 * a.iter().map(|ai| ai.ln()).sum::<f64>();
        let log_r = |v: f64| -> f64 { ratio.iter().map(|&q| -0.25 * (q * v).mul_add(q * v, 1.0).ln()).sum() };
        let integrand = |v: f64| {
            let phi = 0.5 * ratio.iter().map(|&q| (q * v).atan()).sum::<f64>() - v * x;
            log_r(v).exp() * (c * phi.cos() + v * phi.sin()) / (c * c + v * v)
        };
        let envelope = |v: f64| log_r(v).exp() / (c * c + v * v).sqrt();
        // the integrand has height 1/c and width ~ 1/sqrt(K''(c))
        let curvature: f64 = ratio.iter().map(|q| 0.5 * q * q).sum::<f64>() + 1.0 / (c * c);
        let budget = 1e-11 / (c * curvature.sqrt());
        let panel = if x > 0.0 {
            (PI / x).min(20.0 / curvature.sqrt())
        } else {
            20.0 / curvature.sqrt()
        };
        let cfg = HalfLine {
            panel,
            abs_tol: budget,
            rel_tol: 1e-10,
            envelope_tol: 0.0,
            max_panels: 200_000,
        };
        let est = half_line(integrand, envelope, &cfg)?;
        if !(est.value > 0.0) {
            return Err(Error::Quadrature {
                achieved: est.abs_error,
                subdivisions: est.subdivisions,
            });
        }
        Ok(cgf - c * x + (est.value / PI).ln())
    }

    /// `ln P[Q > x]`, relative accuracy retained in the far tail.
    pub fn log_tail(&self, x: T) -> Result<T> {
        let x = Self::check_x(x)?;
        if x <= 0.0 {
            return Ok(T::zero());
        }
        let p = self.imhof(x)?;
        if p >= CONTOUR_SWITCH {
            return Ok(T::lit(p.ln()));
        }
        Ok(T::lit(self.log_tail_contour(x)?))
    }

    /// `P[Q > x]`: real-axis inversion, switching to the saddlepoint contour
    /// when the probability is below [`CONTOUR_SWITCH`].
    pub fn tail(&self, x: T) -> Result<T> {
        let x = Self::check_x(x)?;
        if x <= 0.0 {
            return Ok(T::one());
        }
        let p = self.imhof(x)?;
        if p >= CONTOUR_SWITCH {
            return Ok(T::lit(p));
        }
        Ok(T::lit(self.log_tail_contour(x)?.exp()))
    }

    pub fn cdf(&self, x: T) -> Result<T> {
        Ok(T::one() - self.tail(x)?)
    }

    /// Smallest `x` with `P[Q ≥ x] ≤ e^{−t}` from the Laurent–Massart
    /// inequality: `Σw + 2 sqrt(Σw² t) + 2 max(w) t`.
    pub fn laurent_massart_threshold(&self, t: T) -> Result<T> {
        let t = t.as_f64();
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t",
                value: t,
                reason: "deviation exponent must be positive and finite",
            });
        }
        Ok(T::lit(self.sum + 2.0 * (self.sum_sq * t).sqrt() + 2.0 * self.max * t))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        T::lit(self.sample_f64(rng))
    }

    fn sample_f64<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.w
            .iter()
            .map(|&wi| {
                let z: f64 = rng.sample(StandardNormal);
                wi * z * z
            })
            .sum()
    }

    /// Monte Carlo estimate of `P[Q ≥ x]` with its binomial standard error.
    pub fn tail_montecarlo<R: Rng + ?Sized>(&self, x: T, samples: usize, rng: &mut R) -> Result<(T, T)> {
        let x = Self::check_x(x)?;
        if samples == 0 {
            return Err(Error::InvalidParameter {
                name: "samples",
                value: 0.0,
                reason: "at least one sample is required",
            });
        }
        if x <= 0.0 {
            return Ok((T::one(), T::zero()));
        }
        let hits = (0..samples).filter(|_| self.sample_f64(rng) >= x).count();
        let p = hits as f64 / samples as f64;
        Ok((T::lit(p), T::lit((p * (1.0 - p) / samples as f64).sqrt())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

    fn dist(w: &[f64]) -> QuadFormDist {
        QuadFormDist::new(w.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(QuadFormDist::<f64>::new(vec![]).is_err());
        assert!(QuadFormDist::new(vec![1.0, -0.1]).is_err());
        assert!(QuadFormDist::new(vec![0.0, 0.0]).is_err());
        assert_eq!(
            QuadFormDist::new(vec![1.0, f64::NAN]).unwrap_err(),
            Error::NonFinite("quadratic form weights")
        );
    }

    #[test]
    fn drops_negligible_weights() {
        let d = dist(&[1.0, 1e-14, 0.0, 0.5]);
        assert_eq!(d.weights(), &[1.0, 0.5]);
        assert_eq!(d.mean(), 1.5);
        assert_eq!(d.variance(), 2.5);
    }

    #[test]
    fn chi_square_one_dof() {
        let p = dist(&[1.0]).tail_imhof(3.841_458_820_694_124).unwrap();
        assert!((p - 0.05).abs() < 1e-8, "{p}");
    }

    #[test]
    fn single_weight_closed_form() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        for (w, x) in [(0.9756f64, 3.5673), (0.3, 0.1), (2.0, 9.0), (1.0, 20.0)] {
            let expected = 2.0 * (1.0 - normal.cdf((x / w).sqrt()));
            let got = dist(&[w]).tail_imhof(x).unwrap();
            assert!((got - expected).abs() < 1e-8, "w={w} x={x}: {got} vs {expected}");
        }
    }

    #[test]
    fn equal_weights_are_chi_square() {
        for p in [2usize, 5, 13, 40] {
            let chi = ChiSquared::new(p as f64).unwrap();
            for x in [0.5, p as f64, 2.0 * p as f64 + 7.0] {
                let got = dist(&vec![1.0; p]).tail(x).unwrap();
                let expected = 1.0 - chi.cdf(x);
                assert!((got - expected).abs() < 1e-8, "p={p} x={x}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn contour_matches_chi_square_in_far_tail() {
        for p in [1usize, 4, 13] {
            let chi = ChiSquared::new(p as f64).unwrap();
            for x in [30.0, 60.0, 150.0] {
                let got = dist(&vec![1.0; p]).log_tail(x).unwrap();
                let expected = chi.sf(x).ln();
                assert!(
                    (got - expected).abs() < 1e-6 * expected.abs(),
                    "p={p} x={x}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn contour_agrees_with_imhof_where_both_apply() {
        let d = dist(&[0.9, 0.5, 0.2, 0.05]);
        for x in [4.0, 8.0, 12.0] {
            let imhof = d.imhof(x).unwrap();
            let contour = d.log_tail_contour(x).unwrap().exp();
            assert!(
                (imhof - contour).abs() < 1e-8 + 1e-6 * imhof,
                "x={x}: {imhof} vs {contour}"
            );
        }
    }

    #[test]
    fn far_tail_does_not_underflow() {
        // two equal weights: P[Q > x] = exp(-x / 2w) exactly
        let lt = dist(&[0.01, 0.01]).log_tail(30.0).unwrap();
        assert!((lt + 1500.0).abs() < 1e-6 * 1500.0, "{lt}");
        let lt = dist(&[0.01; 13]).log_tail(30.0).unwrap();
        assert!(lt.is_finite() && lt < -700.0, "{lt}");
    }

    #[test]
    fn toy_detection_probability() {
        let p = dist(&[4.0 / 4.1]).tail(3.567_18).unwrap();
        assert!((p - 0.05585).abs() < 5e-5, "{p}");
    }

    #[test]
    fn monte_carlo_agrees() {
        let d = dist(&[1.5, 0.7, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (p, se) = d.tail_montecarlo(3.0, 200_000, &mut rng).unwrap();
        let exact = d.tail(3.0).unwrap();
        assert!((p - exact).abs() < 4.0 * se, "{p} ± {se} vs {exact}");
        assert_eq!(d.tail_montecarlo(0.0, 10, &mut rng).unwrap(), (1.0, 0.0));
        assert!(d.tail_montecarlo(1.0, 0, &mut rng).is_err());
    }

    #[test]
    fn laurent_massart_bounds_tail() {
        let d = dist(&[0.9, 0.4, 0.4, 0.1]);
        for t in [0.1, 1.0, 5.0, 20.0] {
            let x = d.laurent_massart_threshold(t).unwrap();
            assert!(d.tail(x).unwrap() <= (-t).exp());
        }
        assert!(d.laurent_massart_threshold(0.0).is_err());
    }

    #[test]
    fn single_precision_weights() {
        let d = QuadFormDist::new(vec![1.0f32]).unwrap();
        assert!((d.tail(3.841_458_8f32).unwrap() - 0.05).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn tail_is_a_survival_function(w in prop::collection::vec(0.01f64..3.0, 1..6), x in 0.01f64..20.0) {
            let d = dist(&w);
            let p = d.tail(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(d.tail(x * 1.5).unwrap() <= p + 1e-8);
        }

        #[test]
        fn tail_is_scale_equivariant(w in prop::collection::vec(0.01f64..3.0, 1..6), x in 0.05f64..15.0, c in 0.1f64..10.0) {
            let base = dist(&w).tail(x).unwrap();
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            let other = dist(&scaled).tail(x * c).unwrap();
            prop_assert!((base - other).abs() < 2e-8, "{} vs {}", base, other);
        }
    }
}
