//! Generalized stealth attack construction.
//!
//! The attacker minimizes `I(X; Y_A) + λ D(P_{Y_A} ‖ P_Y)` over Gaussian
//! attack covariances. Up to constants, twice that cost is
//!
//! ```text
//! f(Σ_AA) = −(λ−1) log|Σ_YY + Σ_AA| − log|Σ_AA + σ² I| + λ tr(Σ_YY⁻¹ Σ_AA)
//! ```
//!
//! which is convex for λ ≥ 1. The closed-form attack is
//! `Σ_AA = H Σ_XX Hᵀ / λ`.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianPair, StateModel};
use crate::jacobian::MeasurementMatrix;
use crate::linalg;
use crate::scalar::Real;

/// Number of random directions probed by the stationarity check.
pub const RESIDUAL_DIRECTIONS: usize = 50;
/// Finite-difference step relative to `‖Σ‖_F`.
pub const RESIDUAL_STEP: f64 = 1e-5;
const DIRECTION_SEED: u64 = 0x005E_ED0F_D1C7;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec<T: Real = f64> {
    pub lambda: T,
    pub sigma_aa: DMatrix<T>,
    /// `I(X; Y_A)` under this attack, nats.
    pub mi_under_attack: T,
    /// `D(P_{Y_A} ‖ P_Y)`, nats.
    pub kl_attack: T,
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda >= T::one()) || !lambda.is_finite_value() {
        return Err(Error::LambdaBelowOne(lambda.as_f64()));
    }
    Ok(())
}

fn scaled_signal<T: Real>(h: &MeasurementMatrix<T>, model: &StateModel<T>, lambda: T) -> Result<DMatrix<T>> {
    let s = h.signal_covariance(&model.sigma_xx)?;
    Ok(s.map(|v| v / lambda))
}

pub fn optimal_attack<T: Real>(h: &MeasurementMatrix<T>, model: &StateModel<T>, lambda: T) -> Result<AttackSpec<T>> {
    check_lambda(lambda)?;
    let sigma_aa = scaled_signal(h, model, lambda)?;
    evaluate(h, model, lambda, sigma_aa)
}

/// Attack built from `h_assumed` but scored against the distribution induced
/// by `h_true`.
pub fn mismatched_attack<T: Real>(
    h_true: &MeasurementMatrix<T>,
    h_assumed: &MeasurementMatrix<T>,
    model: &StateModel<T>,
    lambda: T,
) -> Result<AttackSpec<T>> {
    check_lambda(lambda)?;
    if h_true.h.shape() != h_assumed.h.shape() {
        return Err(Error::DimensionMismatch {
            context: "assumed measurement matrix",
            expected: h_true.h.shape(),
            found: h_assumed.h.shape(),
        });
    }
    let sigma_aa = scaled_signal(h_assumed, model, lambda)?;
    evaluate(h_true, model, lambda, sigma_aa)
}

fn evaluate<T: Real>(
    h: &MeasurementMatrix<T>,
    model: &StateModel<T>,
    lambda: T,
    sigma_aa: DMatrix<T>,
) -> Result<AttackSpec<T>> {
    let pair = GaussianPair::new(h, model, &sigma_aa)?;
    Ok(AttackSpec {
        lambda,
        mi_under_attack: pair.mi(&model.sigma_xx)?,
        kl_attack: pair.kl()?,
        sigma_aa,
    })
}

/// `½ log|H Σ Hᵀ (σ² I + H Σ Hᵀ / λ)⁻¹ + I|`, evaluated as written (LU
/// determinant of the non-symmetric product).
pub fn mi_corollary<T: Real>(h: &MeasurementMatrix<T>, model: &StateModel<T>, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    let s = h.signal_covariance(&model.sigma_xx)?;
    let mut noise = s.map(|v| v / lambda);
    for i in 0..noise.nrows() {
        noise[(i, i)] += model.noise_var;
    }
    let chol = Cholesky::new(noise).ok_or(Error::NotPositiveDefinite("attacked mi: noise plus attack"))?;
    // S N⁻¹ = (N⁻¹ S)ᵀ for symmetric S, N
    let mut product = chol.solve(&s).transpose();
    for i in 0..product.nrows() {
        product[(i, i)] += T::one();
    }
    Ok(T::lit(0.5) * linalg::log_abs_det(&product, "attacked mi")?)
}

/// The attack cost with the clean covariance factorized once.
pub struct Objective<T: Real = f64> {
    lambda: T,
    noise_var: T,
    cov_clean: DMatrix<T>,
    chol_clean: Cholesky<T, Dyn>,
}

impl<T: Real> Objective<T> {
    pub fn new(h: &MeasurementMatrix<T>, model: &StateModel<T>, lambda: T) -> Result<Self> {
        if !lambda.is_finite_value() {
            return Err(Error::NonFinite("lambda"));
        }
        let cov_clean = model.clean_covariance(h)?;
        let chol_clean = linalg::cholesky(&cov_clean, "objective: clean covariance")?;
        Ok(Self {
            lambda,
            noise_var: model.noise_var,
            cov_clean,
            chol_clean,
        })
    }

    pub fn dim(&self) -> usize {
        self.cov_clean.nrows()
    }

    /// Cost at `sigma_aa`, rejecting matrices that are not PSD.
    pub fn value(&self, sigma_aa: &DMatrix<T>) -> Result<T> {
        linalg::check_dims(sigma_aa, (self.dim(), self.dim()), "objective: attack covariance")?;
        linalg::psd_eigen(sigma_aa, "objective: attack covariance")?;
        self.value_unchecked(sigma_aa)
    }

    /// Cost without the PSD eigen-check; still fails if a log-determinant
    /// argument is not positive definite.
    pub fn value_unchecked(&self, sigma_aa: &DMatrix<T>) -> Result<T> {
        let attacked = linalg::symmetrize(&(&self.cov_clean + sigma_aa));
        let mut noisy = linalg::symmetrize(sigma_aa);
        for i in 0..noisy.nrows() {
            noisy[(i, i)] += self.noise_var;
        }
        let ld_attacked = linalg::log_det_spd(&attacked, "objective: attacked covariance")?;
        let ld_noisy = linalg::log_det_spd(&noisy, "objective: noise plus attack")?;
        let tr = self.chol_clean.solve(sigma_aa).trace();
        Ok(-(self.lambda - T::one()) * ld_attacked - ld_noisy + self.lambda * tr)
    }
}

pub fn objective<T: Real>(
    sigma_aa: &DMatrix<T>,
    h: &MeasurementMatrix<T>,
    model: &StateModel<T>,
    lambda: T,
) -> Result<T> {
    Objective::new(h, model, lambda)?.value(sigma_aa)
}

/// Cost at `Σ_AA = S / λ` assembled from the eigenvalues `mu` of
/// `S = H Σ_XX Hᵀ` (all m of them, zeros included).
pub fn objective_at_optimum_spectral<T: Real>(mu: &[T], noise_var: T, lambda: T) -> T {
    let one = T::one();
    mu.iter().fold(T::zero(), |acc, &m| {
        let a = m / lambda;
        acc - (lambda - one) * (m + noise_var + a).ln() - (a + noise_var).ln() + lambda * a / (m + noise_var)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual<T: Real = f64> {
    /// Largest central-difference directional derivative magnitude.
    pub value: T,
    /// Directions that kept `Σ ± εV` PSD and were therefore evaluated.
    pub directions_used: usize,
}

/// Finite-difference stationarity check of the cost at `sigma_aa` along
/// [`RESIDUAL_DIRECTIONS`] fixed random symmetric unit directions supported
/// on the range of `sigma_aa`.
pub fn stationarity_residual<T: Real>(
    sigma_aa: &DMatrix<T>,
    h: &MeasurementMatrix<T>,
    model: &StateModel<T>,
    lambda: T,
) -> Result<Residual<T>> {
    let f = Objective::new(h, model, lambda)?;
    linalg::check_dims(sigma_aa, (f.dim(), f.dim()), "residual: attack covariance")?;
    let (values, vectors) = linalg::psd_eigen(sigma_aa, "residual: attack covariance")?;
    let r = linalg::numerical_rank(&values, 1e-10);
    let basis = vectors.columns(0, r).into_owned();
    let eps = T::lit(RESIDUAL_STEP) * sigma_aa.norm();

    let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
    let two = T::lit(2.0);
    let mut best = T::zero();
    let mut used = 0;
    for _ in 0..RESIDUAL_DIRECTIONS {
        let g = DMatrix::from_fn(r, r, |_, _| T::std_normal(&mut rng));
        let w = linalg::symmetrize(&g);
        let w = &w / w.norm();
        // Σ ± εV stays PSD iff diag(values) ± εW does, in the range basis
        let keeps_psd = [T::one(), -T::one()].iter().all(|&sign| {
            let mut m = w.map(|v| v * eps * sign);
            for i in 0..r {
                m[(i, i)] += values[i];
            }
            nalgebra::SymmetricEigen::new(m).eigenvalues.min() >= T::zero()
        });
        if !keeps_psd {
            continue;
        }
        let v = &basis * &w * basis.transpose();
        let step = v.map(|x| x * eps);
        let plus = f.value_unchecked(&(sigma_aa + &step))?;
        let minus = f.value_unchecked(&(sigma_aa - &step))?;
        best = best.max(((plus - minus) / (two * eps)).magnitude());
        used += 1;
    }
    Ok(Residual {
        value: best,
        directions_used: used,
    })
}

/// Stationarity residual of the cost at the closed-form attack.
pub fn optimality_residual<T: Real>(h: &MeasurementMatrix<T>, model: &StateModel<T>, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    let star = scaled_signal(h, model, lambda)?;
    Ok(stationarity_residual(&star, h, model, lambda)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::jacobian::dc_jacobian;
    use approx::assert_relative_eq;

    fn toy(snr: f64) -> (MeasurementMatrix, StateModel) {
        let h = dc_jacobian(&cases::load("toy2").unwrap()).unwrap();
        let model = StateModel::toeplitz(&h, 0.0, snr).unwrap();
        (h, model)
    }

    fn case14() -> (MeasurementMatrix, StateModel) {
        let h = dc_jacobian(&cases::load("case14").unwrap()).unwrap();
        let model = StateModel::toeplitz(&h, 0.1, 10.0).unwrap();
        (h, model)
    }

    #[test]
    fn lambda_one_is_the_unweighted_attack() {
        let (h, model) = case14();
        let a = optimal_attack(&h, &model, 1.0).unwrap();
        assert_eq!(a.sigma_aa, h.signal_covariance(&model.sigma_xx).unwrap());
    }

    #[test]
    fn rejects_lambda_below_one() {
        let (h, model) = toy(10.0);
        assert_eq!(optimal_attack(&h, &model, 0.5).unwrap_err(), Error::LambdaBelowOne(0.5));
        assert!(mi_corollary(&h, &model, 0.99).is_err());
        assert!(optimality_residual(&h, &model, f64::NAN).is_err());
    }

    #[test]
    fn toy_values() {
        let (h, model) = toy(10.0);
        let a = optimal_attack(&h, &model, 2.0).unwrap();
        assert_relative_eq!(a.mi_under_attack, 0.5 * (1.0f64 + 4.0 / 2.1).ln(), epsilon = 1e-12);
        assert_relative_eq!(
            a.kl_attack,
            0.5 * ((4.1f64 / 6.1).ln() - 1.0 + 6.1 / 4.1),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            mi_corollary(&h, &model, 2.0).unwrap(),
            a.mi_under_attack,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            mi_corollary(&h, &model, 1.0).unwrap(),
            0.5 * (1.0f64 + 4.0 / 4.1).ln(),
            epsilon = 1e-12
        );
    }

    fn no_attack_mi(h: &MeasurementMatrix, model: &StateModel) -> f64 {
        GaussianPair::new(h, model, &DMatrix::zeros(h.m(), h.m()))
            .unwrap()
            .mi(&model.sigma_xx)
            .unwrap()
    }

    #[test]
    fn large_lambda_recovers_no_attack() {
        let (h, model) = toy(10.0);
        let a = optimal_attack(&h, &model, 1e6).unwrap();
        assert!((no_attack_mi(&h, &model) - a.mi_under_attack).abs() < 1e-4);

        // the gap is first order in 1/λ: about tr(S) / (2 λ σ²)
        let (h, model) = case14();
        let s = h.signal_covariance(&model.sigma_xx).unwrap();
        let a = optimal_attack(&h, &model, 1e6).unwrap();
        assert!(a.sigma_aa.norm() <= 1e-6 * s.norm() * (1.0 + 1e-12));
        let gap = no_attack_mi(&h, &model) - a.mi_under_attack;
        let first_order = s.trace() / (2.0 * 1e6 * model.noise_var);
        assert!(gap > 0.0 && gap <= first_order, "{gap} vs {first_order}");
    }

    #[test]
    fn sigma_scales_inversely_with_lambda() {
        let (h, model) = case14();
        let base = optimal_attack(&h, &model, 1.0).unwrap().sigma_aa;
        for lambda in [2.0, 3.0, 10.0] {
            let a = optimal_attack(&h, &model, lambda).unwrap().sigma_aa;
            for (x, y) in a.iter().zip(base.iter()) {
                assert!((x - y / lambda).abs() <= 4.0 * f64::EPSILON * y.abs());
            }
        }
    }

    #[test]
    fn mi_monotone_in_lambda() {
        let (h, model) = toy(10.0);
        let vals: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 1e2, 1e3]
            .iter()
            .map(|&l| mi_corollary(&h, &model, l).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn objective_at_zero_attack() {
        let (h, model) = case14();
        let m = h.m();
        let zero = DMatrix::zeros(m, m);
        let lambda = 2.0;
        let cov = model.clean_covariance(&h).unwrap();
        let expected = -(lambda - 1.0) * linalg::log_det_spd(&cov, "t").unwrap() - m as f64 * model.noise_var.ln();
        assert_relative_eq!(objective(&zero, &h, &model, lambda).unwrap(), expected, epsilon = 1e-9);
    }

    #[test]
    fn objective_rejects_non_psd() {
        let (h, model) = toy(10.0);
        let mut bad = DMatrix::zeros(4, 4);
        bad[(0, 0)] = -1.0;
        assert!(matches!(objective(&bad, &h, &model, 2.0), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn objective_matches_spectral_value() {
        let (h, model) = case14();
        let s = h.signal_covariance(&model.sigma_xx).unwrap();
        let (mu, _) = linalg::psd_eigen(&s, "t").unwrap();
        for lambda in [1.0, 2.0, 10.0] {
            let a = optimal_attack(&h, &model, lambda).unwrap();
            let direct = objective(&a.sigma_aa, &h, &model, lambda).unwrap();
            let spectral = objective_at_optimum_spectral(mu.as_slice(), model.noise_var, lambda);
            assert_relative_eq!(direct, spectral, max_relative = 1e-6);
        }
    }

    #[test]
    fn toy_residual_at_lambda_one() {
        let (h, model) = toy(10.0);
        let r = stationarity_residual(&optimal_attack(&h, &model, 1.0).unwrap().sigma_aa, &h, &model, 1.0).unwrap();
        assert!(r.value <= 1e-6, "{}", r.value);
        assert_eq!(r.directions_used, RESIDUAL_DIRECTIONS);
    }

    #[test]
    fn residual_detects_non_stationary_point() {
        let (h, model) = case14();
        let star = optimal_attack(&h, &model, 1.0).unwrap().sigma_aa;
        let at_star = stationarity_residual(&star, &h, &model, 1.0).unwrap().value;
        let off = stationarity_residual(&(&star * 1.1), &h, &model, 1.0).unwrap().value;
        assert!(off >= 10.0 * at_star, "star {at_star}, scaled {off}");
    }

    #[test]
    fn mismatched_with_same_matrix_is_optimal() {
        let (h, model) = case14();
        let a = optimal_attack(&h, &model, 2.0).unwrap();
        let b = mismatched_attack(&h, &h, &model, 2.0).unwrap();
        assert_eq!(a, b);
        let (toy_h, _) = toy(10.0);
        assert!(matches!(
            mismatched_attack(&h, &toy_h, &model, 2.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_precision_attack() {
        let h: MeasurementMatrix<f32> = dc_jacobian(&cases::load("toy2").unwrap()).unwrap();
        let model = StateModel::toeplitz(&h, 0.0f32, 10.0).unwrap();
        let a = optimal_attack(&h, &model, 2.0f32).unwrap();
        assert!((a.mi_under_attack - 0.5332).abs() < 1e-3);
    }
}
