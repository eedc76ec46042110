//! The operator's likelihood ratio test and its detection probability.
//!
//! Against the attack `Σ_AA = S / λ` (with `S = H Σ_XX Hᵀ = U Λ Uᵀ`) the
//! test statistic reduces to a weighted chi-square in the `p = rank(S)`
//! attacked directions, with weights `Δ_i = μ_i / (μ_i + σ²)`:
//!
//! ```text
//! P_D = P[Σ Δ_i u_i² ≥ λ (2 log τ + Σ log(1 + Δ_i / λ))]
//! ```
//!
//! A general attack covariance gives the same structure with weights from the
//! generalized eigenproblem of the two measurement covariances; see
//! [`AttackDetection`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::attack::AttackSpec;
use crate::chisq::{QuadFormDist, WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::gaussian::{MvnSampler, StateModel};
use crate::jacobian::MeasurementMatrix;
use crate::linalg;
use crate::scalar::Real;
use crate::streams;

/// Eigenvalues of `H Σ_XX Hᵀ` at or below this fraction of the largest are
/// treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Minimum number of trials accepted by [`empirical_rates`].
pub const MIN_TRIALS: usize = 1000;
/// Trials per random stream in [`empirical_rates`].
pub const CHUNK: usize = 2048;

fn check_tau_positive<T: Real>(tau: T) -> Result<()> {
    if !(tau > T::zero()) || !tau.is_finite_value() {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau.as_f64(),
            reason: "threshold must be positive and finite",
        });
    }
    Ok(())
}

fn check_tau_above_one<T: Real>(tau: T) -> Result<()> {
    if !(tau > T::one()) || !tau.is_finite_value() {
        return Err(Error::TauNotAboveOne(tau.as_f64()));
    }
    Ok(())
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda >= T::one()) || !lambda.is_finite_value() {
        return Err(Error::LambdaBelowOne(lambda.as_f64()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSpectrum<T: Real = f64> {
    /// `Δ_i` in descending order, each in `(0, 1)`.
    pub delta_diag: Vec<T>,
    pub p: usize,
    pub tau: T,
    pub lambda: T,
    /// `λ (2 log τ + Σ log(1 + Δ_i / λ))`.
    pub threshold_rhs: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumMoments<T: Real = f64> {
    pub tr_delta_sq: T,
    /// `‖Δ‖_∞`, the largest weight.
    pub delta_inf: T,
}

impl<T: Real> SpectrumMoments<T> {
    pub fn new(tr_delta_sq: T, delta_inf: T) -> Result<Self> {
        for (name, v) in [("tr_delta_sq", tr_delta_sq), ("delta_inf", delta_inf)] {
            if !(v > T::zero()) || !v.is_finite_value() {
                return Err(Error::InvalidParameter {
                    name,
                    value: v.as_f64(),
                    reason: "spectrum moments must be positive and finite",
                });
            }
        }
        Ok(Self { tr_delta_sq, delta_inf })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBound<T: Real = f64> {
    /// Exponent with `P_D ≤ e^{−t}`; zero when the bound is vacuous.
    pub t: T,
    pub bound: T,
}

pub fn build_spectrum<T: Real>(
    h: &MeasurementMatrix<T>,
    model: &StateModel<T>,
    lambda: T,
    tau: T,
) -> Result<DetectionSpectrum<T>> {
    let s = h.signal_covariance(&model.sigma_xx)?;
    let (mu, _) = linalg::psd_eigen(&s, "signal covariance")?;
    spectrum_from_eigenvalues(mu.as_slice(), model.noise_var, lambda, tau)
}

/// Spectrum from the eigenvalues of `H Σ_XX Hᵀ` (any order, zeros allowed).
pub fn spectrum_from_eigenvalues<T: Real>(mu: &[T], noise_var: T, lambda: T, tau: T) -> Result<DetectionSpectrum<T>> {
    check_lambda(lambda)?;
    check_tau_positive(tau)?;
    if !(noise_var > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "noise_var",
            value: noise_var.as_f64(),
            reason: "noise variance must be positive",
        });
    }
    let mut mu = mu.to_vec();
    mu.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    let top = mu.first().copied().unwrap_or_else(T::zero);
    let cut = T::lit(RANK_TOLERANCE) * top;
    let delta_diag: Vec<T> = mu
        .iter()
        .take_while(|&&v| v > cut && v > T::zero())
        .map(|&v| v / (v + noise_var))
        .collect();
    if delta_diag.is_empty() {
        return Err(Error::InvalidParameter {
            name: "signal covariance",
            value: top.as_f64(),
            reason: "signal covariance has no positive eigenvalue",
        });
    }
    let log_det: T = delta_diag
        .iter()
        .fold(T::zero(), |acc, &d| acc + (T::one() + d / lambda).ln());
    let threshold_rhs = lambda * (T::lit(2.0) * tau.ln() + log_det);
    Ok(DetectionSpectrum {
        p: delta_diag.len(),
        delta_diag,
        tau,
        lambda,
        threshold_rhs,
    })
}

impl<T: Real> DetectionSpectrum<T> {
    pub fn moments(&self) -> SpectrumMoments<T> {
        SpectrumMoments {
            tr_delta_sq: self.delta_diag.iter().fold(T::zero(), |acc, &d| acc + d * d),
            delta_inf: self.delta_diag[0],
        }
    }

    pub fn distribution(&self) -> Result<QuadFormDist<T>> {
        QuadFormDist::new(self.delta_diag.clone())
    }

    /// Exact `P_D`, integrated numerically.
    pub fn prob_detection(&self) -> Result<T> {
        self.distribution()?.tail(self.threshold_rhs)
    }

    /// `ln P_D`, for detection probabilities too small to represent.
    pub fn log_prob_detection(&self) -> Result<T> {
        self.distribution()?.log_tail(self.threshold_rhs)
    }

    /// Monte Carlo estimate of `P_D` sampling the weighted chi-square directly.
    pub fn prob_detection_mc<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<(T, T)> {
        self.distribution()?.tail_montecarlo(self.threshold_rhs, samples, rng)
    }

    pub fn bound(&self) -> Result<DetectionBound<T>> {
        bound_exponent(&self.moments(), self.tau, self.lambda)
    }
}

pub fn prob_detection<T: Real>(spectrum: &DetectionSpectrum<T>) -> Result<T> {
    spectrum.prob_detection()
}

/// Positive root `λ*(t)` of `2λ log τ − tr(Δ²)/(2λ) = 2 sqrt(tr(Δ²) t) + 2 ‖Δ‖_∞ t`.
pub fn lambda_star<T: Real>(moments: &SpectrumMoments<T>, tau: T, t: T) -> Result<T> {
    check_tau_above_one(tau)?;
    if !(t > T::zero()) || !t.is_finite_value() {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t.as_f64(),
            reason: "exponent must be positive and finite",
        });
    }
    let two = T::lit(2.0);
    let a = two * tau.ln();
    let b = two * (moments.tr_delta_sq * t).sqrt() + two * moments.delta_inf * t;
    let c = moments.tr_delta_sq / two;
    Ok((b + (b * b + T::lit(4.0) * a * c).sqrt()) / (two * a))
}

/// Largest `t` for which the concentration bound certifies `P_D ≤ e^{−t}` at
/// this `λ`.
pub fn bound_exponent<T: Real>(moments: &SpectrumMoments<T>, tau: T, lambda: T) -> Result<DetectionBound<T>> {
    check_tau_above_one(tau)?;
    check_lambda(lambda)?;
    let two = T::lit(2.0);
    let r = two * lambda * tau.ln() - moments.tr_delta_sq / (two * lambda);
    if r <= T::zero() {
        return Ok(DetectionBound {
            t: T::zero(),
            bound: T::one(),
        });
    }
    // 2‖Δ‖∞ s² + 2 sqrt(trΔ²) s − R = 0, written without cancellation
    let q = moments.tr_delta_sq.sqrt();
    let s = r / (q + (q * q + two * moments.delta_inf * r).sqrt());
    let t = s * s;
    Ok(DetectionBound { t, bound: (-t).exp() })
}

/// `log L(y) = ½ [yᵀ(Σ_Y⁻¹ − Σ_A⁻¹) y + log(|Σ_Y| / |Σ_A|)]`.
pub fn lrt_statistic<T: Real>(y: &DVector<T>, cov_clean: &DMatrix<T>, cov_attacked: &DMatrix<T>) -> Result<T> {
    let m = cov_clean.nrows();
    linalg::check_dims(cov_attacked, (m, m), "lrt: attacked covariance")?;
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "lrt: measurement",
            expected: (m, 1),
            found: (y.len(), 1),
        });
    }
    let clean = linalg::cholesky(cov_clean, "lrt: clean covariance")?;
    let attacked = linalg::cholesky(cov_attacked, "lrt: attacked covariance")?;
    let quad = y.dot(&clean.solve(y)) - y.dot(&attacked.solve(y));
    Ok(T::lit(0.5) * (quad + linalg::chol_log_det(&clean) - linalg::chol_log_det(&attacked)))
}

/// Precomputed LRT for repeated evaluation: the quadratic form is kept as
/// its non-negligible eigenpairs `Σ d_k (v_kᵀ y)²`.
#[derive(Debug, Clone)]
pub struct LikelihoodRatioTest<T: Real = f64> {
    directions: DMatrix<T>,
    scales: DVector<T>,
    log_det_term: T,
}

impl<T: Real> LikelihoodRatioTest<T> {
    pub fn new(cov_clean: &DMatrix<T>, cov_attacked: &DMatrix<T>) -> Result<Self> {
        let m = cov_clean.nrows();
        linalg::check_dims(cov_attacked, (m, m), "lrt: attacked covariance")?;
        let clean = linalg::cholesky(cov_clean, "lrt: clean covariance")?;
        let attacked = linalg::cholesky(cov_attacked, "lrt: attacked covariance")?;
        // Σ_Y⁻¹ − Σ_A⁻¹ = Σ_Y⁻¹ (Σ_A − Σ_Y) Σ_A⁻¹ avoids cancelling large inverses
        let diff = cov_attacked - cov_clean;
        let left = clean.solve(&diff);
        let form = linalg::symmetrize(&attacked.solve(&left.transpose()).transpose());
        let eig = nalgebra::SymmetricEigen::new(form);
        let top = eig.eigenvalues.iter().fold(T::zero(), |a, v| a.max(v.magnitude()));
        let keep: Vec<usize> = (0..m)
            .filter(|&k| top > T::zero() && eig.eigenvalues[k].magnitude() > T::lit(1e-13) * top)
            .collect();
        let directions = DMatrix::from_fn(m, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
        let scales = DVector::from_fn(keep.len(), |j, _| eig.eigenvalues[keep[j]]);
        Ok(Self {
            directions,
            scales,
            log_det_term: linalg::chol_log_det(&clean) - linalg::chol_log_det(&attacked),
        })
    }

    pub fn statistic(&self, y: &DVector<T>) -> T {
        let proj = self.directions.tr_mul(y);
        let quad = proj
            .iter()
            .zip(self.scales.iter())
            .fold(T::zero(), |acc, (&p, &d)| acc + d * p * p);
        T::lit(0.5) * (quad + self.log_det_term)
    }

    /// Statistics for every column of `ys`.
    pub fn statistics(&self, ys: &DMatrix<T>) -> Vec<T> {
        let proj = self.directions.tr_mul(ys);
        proj.column_iter()
            .map(|col| {
                let quad = col
                    .iter()
                    .zip(self.scales.iter())
                    .fold(T::zero(), |acc, (&p, &d)| acc + d * p * p);
                T::lit(0.5) * (quad + self.log_det_term)
            })
            .collect()
    }

    pub fn detects(&self, y: &DVector<T>, tau: T) -> bool {
        self.statistic(y) >= tau.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRates<T: Real = f64> {
    pub p_detect: T,
    pub p_false_alarm: T,
    pub se_detect: T,
    pub se_false_alarm: T,
    pub trials: usize,
}

fn binomial<T: Real>(hits: usize, trials: usize) -> (T, T) {
    let p = hits as f64 / trials as f64;
    (T::lit(p), T::lit((p * (1.0 - p) / trials as f64).sqrt()))
}

/// LRT detection and false-alarm rates from full measurement vectors
/// `y = H x + z (+ a)`, with the operator's covariances built from `h_true`.
pub fn empirical_rates<T: Real, R: RngCore + ?Sized>(
    h_true: &MeasurementMatrix<T>,
    model: &StateModel<T>,
    attack: &AttackSpec<T>,
    tau: T,
    trials: usize,
    rng: &mut R,
) -> Result<EmpiricalRates<T>> {
    empirical_rates_seeded(h_true, model, &attack.sigma_aa, tau, trials, rng.next_u64())
}

/// As [`empirical_rates`], drawing chunk `k` from `streams::stream(seed, [k])`
/// so the result does not depend on the number of worker threads.
pub fn empirical_rates_seeded<T: Real>(
    h_true: &MeasurementMatrix<T>,
    model: &StateModel<T>,
    sigma_aa: &DMatrix<T>,
    tau: T,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalRates<T>> {
    check_tau_positive(tau)?;
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: trials as f64,
            reason: "at least 1000 trials are required",
        });
    }
    let m = h_true.m();
    linalg::check_dims(sigma_aa, (m, m), "empirical rates: attack covariance")?;
    let cov_clean = model.clean_covariance(h_true)?;
    let cov_attacked = linalg::symmetrize(&(&cov_clean + sigma_aa));
    let test = LikelihoodRatioTest::new(&cov_clean, &cov_attacked)?;
    let signal = &h_true.h * MvnSampler::new(&model.sigma_xx)?.factor();
    let attack = MvnSampler::new(sigma_aa)?;
    let noise_sd = model.noise_var.sqrt();
    let log_tau = tau.ln();

    let draw = |count: usize, attacked: bool, rng: &mut streams::StreamRng| {
        let w = DMatrix::from_fn(signal.ncols(), count, |_, _| T::std_normal(rng));
        let mut y = &signal * w;
        for v in y.iter_mut() {
            *v += noise_sd * T::std_normal(rng);
        }
        if attacked && attack.rank() > 0 {
            y += attack.sample_matrix(count, rng);
        }
        test.statistics(&y).into_iter().filter(|&s| s >= log_tau).count()
    };

    let chunks = trials.div_ceil(CHUNK);
    let (hits_detect, hits_alarm) = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let count = CHUNK.min(trials - k * CHUNK);
            let mut rng = streams::stream(seed, &[k as u64]);
            let d = draw(count, true, &mut rng);
            let f = draw(count, false, &mut rng);
            (d, f)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let (p_detect, se_detect) = binomial(hits_detect, trials);
    let (p_false_alarm, se_false_alarm) = binomial(hits_alarm, trials);
    Ok(EmpiricalRates {
        p_detect,
        p_false_alarm,
        se_detect,
        se_false_alarm,
        trials,
    })
}

/// Detection problem for an arbitrary attack covariance: with
/// `Σ_A = Σ_Y + Σ_AA` and `ν` the eigenvalues of `Σ_Y⁻¹ Σ_AA`, the test fires
/// when `Σ ν_i u_i² ≥ 2 log τ + Σ log(1 + ν_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackDetection<T: Real = f64> {
    /// `None` when the attack covariance is numerically zero.
    pub distribution: Option<QuadFormDist<T>>,
    pub threshold: T,
}

impl<T: Real> AttackDetection<T> {
    pub fn new(cov_clean: &DMatrix<T>, sigma_aa: &DMatrix<T>, tau: T) -> Result<Self> {
        check_tau_positive(tau)?;
        let m = cov_clean.nrows();
        linalg::check_dims(sigma_aa, (m, m), "attack detection: attack covariance")?;
        let chol = linalg::cholesky(cov_clean, "attack detection: clean covariance")?;
        let l = chol.l();
        let tmp = l
            .solve_lower_triangular(sigma_aa)
            .ok_or(Error::NotPositiveDefinite("attack detection"))?;
        let whitened = l
            .solve_lower_triangular(&tmp.transpose())
            .ok_or(Error::NotPositiveDefinite("attack detection"))?;
        let (nu, _) = linalg::psd_eigen(&linalg::symmetrize(&whitened), "whitened attack covariance")?;
        let top = nu.iter().fold(T::zero(), |a, &v| a.max(v));
        let cut = T::lit(WEIGHT_FLOOR) * top;
        let weights: Vec<T> = nu.iter().copied().filter(|&v| top > T::zero() && v > cut).collect();
        let log_det = weights.iter().fold(T::zero(), |acc, &v| acc + v.ln_1p());
        let threshold = T::lit(2.0) * tau.ln() + log_det;
        let distribution = if weights.is_empty() {
            None
        } else {
            Some(QuadFormDist::new(weights)?)
        };
        Ok(Self {
            distribution,
            threshold,
        })
    }

    pub fn prob_detection(&self) -> Result<T> {
        match &self.distribution {
            Some(d) => d.tail(self.threshold),
            None if self.threshold <= T::zero() => Ok(T::one()),
            None => Ok(T::zero()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::optimal_attack;
    use crate::cases;
    use crate::jacobian::dc_jacobian;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn toy() -> (MeasurementMatrix, StateModel) {
        let h = dc_jacobian(&cases::load("toy2").unwrap()).unwrap();
        let model = StateModel::toeplitz(&h, 0.0, 10.0).unwrap();
        (h, model)
    }

    fn case14() -> (MeasurementMatrix, StateModel) {
        let h = dc_jacobian(&cases::load("case14").unwrap()).unwrap();
        let model = StateModel::toeplitz(&h, 0.1, 10.0).unwrap();
        (h, model)
    }

    #[test]
    fn toy_spectrum() {
        let (h, model) = toy();
        let s = build_spectrum(&h, &model, 2.0, 2.0).unwrap();
        assert_eq!(s.p, 1);
        assert_relative_eq!(s.delta_diag[0], 4.0 / 4.1, epsilon = 1e-12);
        let rhs = 2.0 * (2.0 * 2.0f64.ln() + (1.0 + 2.0 / 4.1f64).ln());
        assert_relative_eq!(s.threshold_rhs, rhs, epsilon = 1e-12);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let expected = 2.0 * (1.0 - normal.cdf((rhs * 4.1 / 4.0).sqrt()));
        assert!((s.prob_detection().unwrap() - expected).abs() < 1e-8);
    }

    #[test]
    fn case14_has_full_rank() {
        let (h, model) = case14();
        let s = build_spectrum(&h, &model, 2.0, 2.0).unwrap();
        assert_eq!(s.p, 13);
        assert!(s.delta_diag.iter().all(|&d| d > 0.0 && d < 1.0));
        assert!(s.delta_diag.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn weights_vanish_with_noise() {
        let s = spectrum_from_eigenvalues(&[4.0, 1.0, 0.0], 1e12, 1.0, 2.0).unwrap();
        assert_eq!(s.p, 2);
        assert!(s.delta_diag.iter().all(|&d| d < 1e-11));
    }

    #[test]
    fn tiny_tau_detects_always() {
        let (h, model) = toy();
        let s = build_spectrum(&h, &model, 2.0, 1e-6).unwrap();
        assert!(s.threshold_rhs < 0.0);
        assert_eq!(s.prob_detection().unwrap(), 1.0);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let (h, model) = toy();
        assert_eq!(
            build_spectrum(&h, &model, 0.5, 2.0).unwrap_err(),
            Error::LambdaBelowOne(0.5)
        );
        assert!(build_spectrum(&h, &model, 2.0, 0.0).is_err());
        let m = SpectrumMoments::new(1.0, 1.0).unwrap();
        assert_eq!(lambda_star(&m, 1.0, 1.0).unwrap_err(), Error::TauNotAboveOne(1.0));
        assert_eq!(bound_exponent(&m, 0.5, 2.0).unwrap_err(), Error::TauNotAboveOne(0.5));
        assert!(bound_exponent(&m, 2.0, 0.9).is_err());
        assert!(lambda_star(&m, 2.0, 0.0).is_err());
        assert!(SpectrumMoments::new(0.0, 1.0).is_err());
    }

    #[test]
    fn toy_bound() {
        let (h, model) = toy();
        let s = build_spectrum(&h, &model, 2.0, 2.0).unwrap();
        let mom = s.moments();
        let r = 4.0 * 2.0f64.ln() - mom.tr_delta_sq / 4.0;
        let q = mom.tr_delta_sq.sqrt();
        let root = (-q + (q * q + 2.0 * mom.delta_inf * r).sqrt()) / (2.0 * mom.delta_inf);
        let b = s.bound().unwrap();
        assert_relative_eq!(b.t, root * root, epsilon = 1e-12);
        assert!((b.t - 0.554412).abs() < 1e-6);
        assert!((b.bound - 0.574410).abs() < 1e-6);
        assert!(b.bound >= s.prob_detection().unwrap());
        assert_relative_eq!(lambda_star(&mom, 2.0, b.t).unwrap(), 2.0, max_relative = 1e-9);
    }

    #[test]
    fn vacuous_bound_when_exponent_negative() {
        let m = SpectrumMoments::new(100.0, 1.0).unwrap();
        assert_eq!(
            bound_exponent(&m, 1.01, 1.0).unwrap(),
            DetectionBound { t: 0.0, bound: 1.0 }
        );
    }

    #[test]
    fn lambda_star_limits() {
        let m = SpectrumMoments::new(0.95, 0.97).unwrap();
        let small = lambda_star(&m, 2.0, 1e-14).unwrap();
        assert_relative_eq!(small, (0.95 / (4.0 * 2.0f64.ln())).sqrt(), max_relative = 1e-6);
        let ts = [0.1, 0.5, 1.0, 3.0, 10.0];
        let ls: Vec<f64> = ts.iter().map(|&t| lambda_star(&m, 2.0, t).unwrap()).collect();
        assert!(ls.windows(2).all(|w| w[1] > w[0]));
        for (&t, &l) in ts.iter().zip(&ls) {
            let residual = 2.0 * l * 2.0f64.ln() - 0.95 / (2.0 * l) - 2.0 * (0.95 * t).sqrt() - 2.0 * 0.97 * t;
            assert!(residual.abs() <= 1e-9 * l.max(1.0));
        }
    }

    #[test]
    fn bound_inverts_lambda_star() {
        let m = SpectrumMoments::new(3.2, 0.9).unwrap();
        for t in [0.3, 1.0, 4.0, 25.0] {
            let l = lambda_star(&m, 2.0, t).unwrap();
            if l >= 1.0 {
                assert_relative_eq!(bound_exponent(&m, 2.0, l).unwrap().t, t, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn lrt_trivial_cases() {
        let (h, model) = case14();
        let clean = model.clean_covariance(&h).unwrap();
        let y = DVector::from_fn(h.m(), |i, _| (i as f64 * 0.37).sin());
        assert_eq!(lrt_statistic(&y, &clean, &clean).unwrap(), 0.0);
        let a = optimal_attack(&h, &model, 2.0).unwrap();
        let attacked = &clean + &a.sigma_aa;
        let zero = DVector::zeros(h.m());
        let at_zero = lrt_statistic(&zero, &clean, &attacked).unwrap();
        assert!(at_zero < 0.0);
        let pre = LikelihoodRatioTest::new(&clean, &attacked).unwrap();
        assert_relative_eq!(pre.statistic(&zero), at_zero, max_relative = 1e-10);
        assert_relative_eq!(
            pre.statistic(&y),
            lrt_statistic(&y, &clean, &attacked).unwrap(),
            max_relative = 1e-8,
            epsilon = 1e-10
        );
        let mut bad = clean.clone();
        bad[(0, 0)] = -1.0;
        assert!(lrt_statistic(&y, &bad, &attacked).is_err());
    }

    #[test]
    fn mean_log_ratio_is_kl() {
        let (h, model) = toy();
        let a = optimal_attack(&h, &model, 2.0).unwrap();
        let clean = model.clean_covariance(&h).unwrap();
        let attacked = &clean + &a.sigma_aa;
        let test = LikelihoodRatioTest::new(&clean, &attacked).unwrap();
        let sampler = MvnSampler::new(&attacked).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stats = test.statistics(&sampler.sample_matrix(100_000, &mut rng));
        let n = stats.len() as f64;
        let mean = stats.iter().sum::<f64>() / n;
        let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(
            (mean - a.kl_attack).abs() < 3.0 * (var / n).sqrt(),
            "{mean} vs {}",
            a.kl_attack
        );
    }

    #[test]
    fn empirical_rates_match_exact_value() {
        let (h, model) = toy();
        let a = optimal_attack(&h, &model, 2.0).unwrap();
        let exact = build_spectrum(&h, &model, 2.0, 2.0).unwrap().prob_detection().unwrap();
        let r = empirical_rates_seeded(&h, &model, &a.sigma_aa, 2.0, 100_000, 3).unwrap();
        assert!(
            (r.p_detect - exact).abs() < 3.0 * r.se_detect,
            "{} vs {exact}",
            r.p_detect
        );
        assert!(r.p_false_alarm < r.p_detect);
    }

    #[test]
    fn empirical_rates_without_attack() {
        let (h, model) = case14();
        let zero = DMatrix::zeros(h.m(), h.m());
        let r = empirical_rates_seeded(&h, &model, &zero, 0.5, 5000, 9).unwrap();
        assert_eq!(r.p_detect, 1.0);
        assert_eq!(r.p_false_alarm, 1.0);
        assert!(empirical_rates_seeded(&h, &model, &zero, 2.0, 999, 9).is_err());
    }

    #[test]
    fn false_alarm_is_seed_independent() {
        let (h, model) = toy();
        let a = optimal_attack(&h, &model, 2.0).unwrap();
        let r1 = empirical_rates_seeded(&h, &model, &a.sigma_aa, 1.0, 50_000, 1).unwrap();
        let r2 = empirical_rates_seeded(&h, &model, &a.sigma_aa, 1.0, 50_000, 2).unwrap();
        let se = (r1.se_false_alarm.powi(2) + r2.se_false_alarm.powi(2)).sqrt();
        assert!((r1.p_false_alarm - r2.p_false_alarm).abs() < 3.0 * se);
        let again = empirical_rates_seeded(&h, &model, &a.sigma_aa, 1.0, 50_000, 1).unwrap();
        assert_eq!(r1, again);
    }

    #[test]
    fn general_detection_matches_matched_spectrum() {
        let (h, model) = case14();
        for lambda in [1.0, 2.0, 16.0] {
            let a = optimal_attack(&h, &model, lambda).unwrap();
            let clean = model.clean_covariance(&h).unwrap();
            let general = AttackDetection::new(&clean, &a.sigma_aa, 2.0).unwrap();
            let spec = build_spectrum(&h, &model, lambda, 2.0).unwrap();
            let d = general.distribution.as_ref().unwrap();
            assert_eq!(d.len(), spec.p);
            for (nu, delta) in d.weights().iter().zip(&spec.delta_diag) {
                assert_relative_eq!(nu * lambda, *delta, max_relative = 1e-8);
            }
            assert_relative_eq!(general.threshold * lambda, spec.threshold_rhs, max_relative = 1e-9);
            assert!((general.prob_detection().unwrap() - spec.prob_detection().unwrap()).abs() < 1e-8);
        }
        let clean = model.clean_covariance(&h).unwrap();
        let none = AttackDetection::new(&clean, &DMatrix::zeros(h.m(), h.m()), 2.0).unwrap();
        assert_eq!(none.prob_detection().unwrap(), 0.0);
    }

    #[test]
    fn quadratic_form_mc_matches() {
        let (h, model) = case14();
        let s = build_spectrum(&h, &model, 4.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (p, se) = s.prob_detection_mc(100_000, &mut rng).unwrap();
        let exact = s.prob_detection().unwrap();
        assert!((p - exact).abs() < 3.0 * se, "{p} ± {se} vs {exact}");
    }
}
