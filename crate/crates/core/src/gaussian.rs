//! Zero-mean Gaussian model of the grid: state covariance, noise level from
//! SNR, measurement covariances, information measures and sampling.
//!
//! All information quantities are in nats.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::jacobian::MeasurementMatrix;
use crate::linalg::{self, check_dims, check_symmetric};
use crate::scalar::Real;

/// `Σ_ij = ρ^|i−j|`.
pub fn toeplitz_cov<T: Real>(n: usize, rho: T) -> Result<DMatrix<T>> {
    if !(rho >= T::zero() && rho < T::one()) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho.as_f64(),
            reason: "decay must lie in [0, 1)",
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "dimension must be positive",
        });
    }
    let powers: Vec<T> = std::iter::successors(Some(T::one()), |p| Some(*p * rho))
        .take(n)
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| powers[i.abs_diff(j)]))
}

/// Noise variance giving `10 log10(tr(H Σ Hᵀ) / (m σ²)) = snr_db`.
pub fn noise_var_from_snr<T: Real>(h: &MeasurementMatrix<T>, sigma_xx: &DMatrix<T>, snr_db: T) -> Result<T> {
    let tr = h.signal_covariance(sigma_xx)?.trace();
    if !tr.is_finite_value() || !snr_db.is_finite_value() {
        return Err(Error::NonFinite("signal power"));
    }
    let m = T::from_usize(h.m()).expect("fits");
    let ratio = T::lit(10.0).powf(snr_db / T::lit(10.0));
    let var = tr / (m * ratio);
    if !(var > T::zero()) || !var.is_finite_value() {
        return Err(Error::NonFinite("noise variance"));
    }
    Ok(var)
}

pub fn snr_db_of<T: Real>(h: &MeasurementMatrix<T>, sigma_xx: &DMatrix<T>, noise_var: T) -> Result<T> {
    let tr = h.signal_covariance(sigma_xx)?.trace();
    let m = T::from_usize(h.m()).expect("fits");
    Ok(T::lit(10.0) * (tr / (m * noise_var)).log10())
}

/// Second-order description of the state and sensor noise.
#[derive(Debug, Clone, PartialEq)]
pub struct StateModel<T: Real = f64> {
    pub sigma_xx: DMatrix<T>,
    pub rho: T,
    pub noise_var: T,
    pub snr_db: T,
}

impl<T: Real> StateModel<T> {
    /// Toeplitz state covariance with decay `rho` and the noise level that
    /// gives `snr_db` for this measurement matrix.
    pub fn toeplitz(h: &MeasurementMatrix<T>, rho: T, snr_db: T) -> Result<Self> {
        let sigma_xx = toeplitz_cov(h.n(), rho)?;
        let noise_var = noise_var_from_snr(h, &sigma_xx, snr_db)?;
        Ok(Self {
            sigma_xx,
            rho,
            noise_var,
            snr_db,
        })
    }

    /// Measurement covariance without attack, `H Σ Hᵀ + σ² I`.
    pub fn clean_covariance(&self, h: &MeasurementMatrix<T>) -> Result<DMatrix<T>> {
        let mut s = h.signal_covariance(&self.sigma_xx)?;
        for i in 0..s.nrows() {
            s[(i, i)] += self.noise_var;
        }
        Ok(s)
    }
}

/// Clean and attacked measurement covariances with the state/measurement
/// cross-covariance `Σ_XX Hᵀ` (n × m).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPair<T: Real = f64> {
    pub cov_clean: DMatrix<T>,
    pub cov_attacked: DMatrix<T>,
    pub cross_cov: DMatrix<T>,
}

impl<T: Real> GaussianPair<T> {
    pub fn new(h: &MeasurementMatrix<T>, model: &StateModel<T>, sigma_aa: &DMatrix<T>) -> Result<Self> {
        check_dims(sigma_aa, (h.m(), h.m()), "attack covariance")?;
        let cov_clean = model.clean_covariance(h)?;
        let cov_attacked = linalg::symmetrize(&(&cov_clean + sigma_aa));
        let cross_cov = &model.sigma_xx * h.h.transpose();
        Ok(Self {
            cov_clean,
            cov_attacked,
            cross_cov,
        })
    }

    /// `D(P_attacked ‖ P_clean)`.
    pub fn kl(&self) -> Result<T> {
        gaussian_kl(&self.cov_attacked, &self.cov_clean)
    }

    /// `I(X; Y_A)` given the state covariance.
    pub fn mi(&self, sigma_xx: &DMatrix<T>) -> Result<T> {
        gaussian_mi(sigma_xx, &self.cross_cov, &self.cov_attacked)
    }
}

/// `D(N(0, P) ‖ N(0, Q)) = ½ (log|Q|/|P| − m + tr(Q⁻¹ P))`.
pub fn gaussian_kl<T: Real>(cov_p: &DMatrix<T>, cov_q: &DMatrix<T>) -> Result<T> {
    check_symmetric(cov_p, "kl: cov_p")?;
    check_dims(cov_q, cov_p.shape(), "kl: cov_q")?;
    let chol_p = linalg::cholesky(cov_p, "kl: cov_p")?;
    let chol_q = linalg::cholesky(cov_q, "kl: cov_q")?;
    let m = T::from_usize(cov_p.nrows()).expect("fits");
    let tr = chol_q.solve(cov_p).trace();
    let d = T::lit(0.5) * (linalg::chol_log_det(&chol_q) - linalg::chol_log_det(&chol_p) - m + tr);
    // rounding can leave a tiny negative value for identical inputs
    Ok(d.max(T::zero()))
}

/// `I(X; Y)` for jointly Gaussian vectors via the Schur complement:
/// `½ log(|Σ_Y| / |Σ_Y − Cᵀ Σ_X⁻¹ C|)` where `C` is the n × m cross-covariance.
pub fn gaussian_mi<T: Real>(cov_x: &DMatrix<T>, cross: &DMatrix<T>, cov_y: &DMatrix<T>) -> Result<T> {
    check_symmetric(cov_x, "mi: cov_x")?;
    check_symmetric(cov_y, "mi: cov_y")?;
    check_dims(cross, (cov_x.nrows(), cov_y.nrows()), "mi: cross-covariance")?;
    let chol_x = linalg::cholesky(cov_x, "mi: cov_x")?;
    let explained = cross.transpose() * chol_x.solve(cross);
    let schur = linalg::symmetrize(&(cov_y - explained));
    let i = T::lit(0.5)
        * (linalg::log_det_spd(cov_y, "mi: cov_y")? - linalg::log_det_spd(&schur, "mi: conditional covariance")?);
    Ok(i.max(T::zero()))
}

/// Draws zero-mean Gaussian vectors through a fixed symmetric factor.
///
/// The factor comes from a clamped eigendecomposition so singular PSD
/// covariances (such as a rank-n attack covariance in m > n dimensions) are
/// handled; it has only as many columns as the covariance rank.
#[derive(Debug, Clone)]
pub struct MvnSampler<T: Real = f64> {
    factor: DMatrix<T>,
}

impl<T: Real> MvnSampler<T> {
    pub fn new(cov: &DMatrix<T>) -> Result<Self> {
        Ok(Self {
            factor: linalg::psd_factor(cov, "sampler covariance")?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// The `dim × rank` factor `F` with `F Fᵀ` equal to the covariance.
    pub fn factor(&self) -> &DMatrix<T> {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let w = DVector::from_fn(self.rank(), |_, _| T::std_normal(rng));
        &self.factor * w
    }

    /// `count` draws as the columns of a `dim × count` matrix.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> DMatrix<T> {
        let w = DMatrix::from_fn(self.rank(), count, |_, _| T::std_normal(rng));
        &self.factor * w
    }
}

pub fn sample_mvn<T: Real, R: Rng + ?Sized>(cov: &DMatrix<T>, count: usize, rng: &mut R) -> Result<Vec<DVector<T>>> {
    let sampler = MvnSampler::new(cov)?;
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::jacobian::dc_jacobian;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> MeasurementMatrix {
        dc_jacobian(&cases::load("toy2").unwrap()).unwrap()
    }

    #[test]
    fn toeplitz_examples() {
        assert_eq!(toeplitz_cov(3, 0.0).unwrap(), DMatrix::identity(3, 3));
        let t = toeplitz_cov(2, 0.9).unwrap();
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]));
        assert!(toeplitz_cov(3, 1.0).is_err());
        assert!(toeplitz_cov(3, -0.1).is_err());
        assert!(toeplitz_cov::<f64>(0, 0.5).is_err());
    }

    #[test]
    fn toeplitz_eigenvalue_floor() {
        let rho = 0.1;
        let t = toeplitz_cov(13, rho).unwrap();
        let min = SymmetricEigen::new(t).eigenvalues.min();
        assert!(min >= (1.0 - rho) / (1.0 + rho));
    }

    #[test]
    fn toeplitz_positive_definite_over_grid() {
        for n in [13, 29, 117] {
            for rho in [0.0, 0.1, 0.5, 0.9, 0.99] {
                let t = toeplitz_cov(n, rho).unwrap();
                assert!(nalgebra::Cholesky::new(t).is_some(), "n={n} rho={rho}");
            }
        }
    }

    #[test]
    fn noise_from_snr_toy() {
        let h = toy();
        let sxx = DMatrix::identity(1, 1);
        assert_relative_eq!(noise_var_from_snr(&h, &sxx, 10.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(noise_var_from_snr(&h, &sxx, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        let doubled = noise_var_from_snr(&h, &(sxx * 2.0), 10.0).unwrap();
        assert_relative_eq!(doubled, 0.2, epsilon = 1e-15);
        assert!(noise_var_from_snr(&h, &DMatrix::from_element(1, 1, f64::NAN), 10.0).is_err());
    }

    #[test]
    fn snr_round_trip() {
        let h: MeasurementMatrix = dc_jacobian(&cases::load("case30").unwrap()).unwrap();
        let sxx = toeplitz_cov(h.n(), 0.3).unwrap();
        for snr in [-5.0, 0.0, 10.0, 20.0, 37.5] {
            let v = noise_var_from_snr(&h, &sxx, snr).unwrap();
            assert!((snr_db_of(&h, &sxx, v).unwrap() - snr).abs() < 1e-10);
        }
    }

    #[test]
    fn kl_scalar_and_identity() {
        let p = DMatrix::from_element(1, 1, 6.1);
        let q = DMatrix::from_element(1, 1, 4.1);
        let expected = 0.5 * ((4.1f64 / 6.1).ln() - 1.0 + 6.1 / 4.1);
        assert_relative_eq!(gaussian_kl(&p, &q).unwrap(), expected, epsilon = 1e-14);
        assert_relative_eq!(expected, 0.045252, epsilon = 1e-6);
        assert!(gaussian_kl(&q, &q).unwrap() < 1e-15);
    }

    #[test]
    fn kl_rejects_non_pd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let good = DMatrix::identity(2, 2);
        assert!(gaussian_kl(&bad, &good).is_err());
        assert!(gaussian_kl(&good, &bad).is_err());
    }

    #[test]
    fn mi_independent_is_zero() {
        let cx = DMatrix::identity(2, 2);
        let cy = DMatrix::identity(3, 3) * 2.0;
        assert_eq!(gaussian_mi(&cx, &DMatrix::zeros(2, 3), &cy).unwrap(), 0.0);
        assert!(gaussian_mi(&cx, &DMatrix::zeros(3, 3), &cy).is_err());
    }

    #[test]
    fn toy_no_attack_mi() {
        let h = toy();
        let model = StateModel::toeplitz(&h, 0.0, 10.0).unwrap();
        let pair = GaussianPair::new(&h, &model, &DMatrix::zeros(4, 4)).unwrap();
        let mi = pair.mi(&model.sigma_xx).unwrap();
        assert_relative_eq!(mi, 0.5 * (1.0f64 + 4.0 / 0.1).ln(), epsilon = 1e-12);
        assert_relative_eq!(mi, 1.8568, epsilon = 1e-4);
        assert_eq!(pair.kl().unwrap(), 0.0);
    }

    #[test]
    fn sampler_zero_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_mvn(&DMatrix::<f64>::zeros(3, 3), 5, &mut rng).unwrap();
        assert!(s.iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn sampler_rejects_asymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        assert_eq!(
            sample_mvn(&m, 1, &mut rng).unwrap_err(),
            Error::NotSymmetric("sampler covariance")
        );
    }

    #[test]
    fn sampler_identity_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let count = 100_000;
        let cov = DMatrix::<f64>::identity(2, 2);
        let xs = sample_mvn(&cov, count, &mut rng).unwrap();
        let mut sc = DMatrix::<f64>::zeros(2, 2);
        let mut mean = DVector::<f64>::zeros(2);
        for x in &xs {
            sc += x * x.transpose();
            mean += x;
        }
        sc /= count as f64;
        mean /= count as f64;
        for (a, b) in sc.iter().zip(cov.iter()) {
            assert!((a - b).abs() < 0.02);
        }
        assert!(mean.norm() <= 4.0 * (cov.trace() / count as f64).sqrt());
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let cov = toeplitz_cov(4, 0.5).unwrap();
        let a = sample_mvn(&cov, 10, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_mvn(&cov, 10, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_handles_rank_deficient() {
        let h = toy();
        let s = h.signal_covariance(&DMatrix::identity(1, 1)).unwrap();
        let sampler = MvnSampler::new(&s).unwrap();
        assert_eq!(sampler.rank(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = sampler.sample(&mut rng);
        // every draw lies on the column space of H
        assert_relative_eq!(x[0], -x[1], epsilon = 1e-12);
        assert_relative_eq!(x[0], x[2], epsilon = 1e-12);
    }
}
