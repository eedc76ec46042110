//! Generalized stealth data-injection attacks on linearized power-system
//! state estimation.
//!
//! The pipeline is: parse a MATPOWER case ([`matpower`]), build the
//! measurement Jacobian ([`jacobian`]), describe the state and noise
//! statistics ([`gaussian`]), construct the attack ([`attack`]) and evaluate
//! how likely the operator's likelihood ratio test is to notice it
//! ([`detector`], backed by [`chisq`]).
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the experiment
//! harness uses.

pub mod attack;
pub mod cases;
pub mod chisq;
pub mod detector;
pub mod error;
pub mod gaussian;
pub mod jacobian;
pub mod linalg;
pub mod matpower;
pub mod quadrature;
pub mod scalar;
pub mod streams;

pub use attack::{mi_corollary, mismatched_attack, objective, optimal_attack, optimality_residual, AttackSpec};
pub use chisq::QuadFormDist;
pub use detector::{
    bound_exponent, build_spectrum, empirical_rates, lambda_star, lrt_statistic, prob_detection, AttackDetection,
    DetectionBound, DetectionSpectrum, EmpiricalRates, LikelihoodRatioTest, SpectrumMoments,
};
pub use error::{Error, Result};
pub use gaussian::{gaussian_kl, gaussian_mi, toeplitz_cov, GaussianPair, StateModel};
pub use jacobian::{ac_jacobian_at, dc_jacobian, perturb_point, MeasurementMatrix, OperatingPoint};
pub use matpower::{parse_case, GridCase};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Matrix64 = nalgebra::DMatrix<f64>;
pub type Vector64 = nalgebra::DVector<f64>;
pub type MeasurementMatrix64 = MeasurementMatrix<f64>;
pub type MeasurementMatrix32 = MeasurementMatrix<f32>;
pub type OperatingPoint64 = OperatingPoint<f64>;
pub type StateModel64 = StateModel<f64>;
pub type StateModel32 = StateModel<f32>;
pub type GaussianPair64 = GaussianPair<f64>;
pub type AttackSpec64 = AttackSpec<f64>;
pub type AttackSpec32 = AttackSpec<f32>;
pub type QuadFormDist64 = QuadFormDist<f64>;
pub type DetectionSpectrum64 = DetectionSpectrum<f64>;
