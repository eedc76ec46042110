use anyhow::Context;
use rayon::prelude::*;
use stealth_core::detector::{empirical_rates_seeded, spectrum_from_eigenvalues};
use stealth_core::linalg::psd_eigen;
use stealth_core::streams::{derive_seed, stream};
use stealth_core::{
    ac_jacobian_at, dc_jacobian, mismatched_attack, optimal_attack, perturb_point, AttackDetection,
    MeasurementMatrix64, OperatingPoint64, StateModel64,
};

use crate::config::{Experiment, ExperimentConfig, LoadedCase};
use crate::output::{SpreadRow, SweepRow};

// keeps the streams of different experiments apart under one master seed
fn experiment_tag(e: Experiment) -> u64 {
    match e {
        Experiment::RhoSweep => 1,
        Experiment::LambdaSweep => 2,
        Experiment::AcSensitivity => 3,
    }
}

struct Setting<'a> {
    case: &'a LoadedCase,
    snr_db: f64,
    rho: f64,
}

/// Grid points in declared order: case, SNR, ρ, then the inner grids.
fn settings<'a>(cfg: &ExperimentConfig, cases: &'a [LoadedCase]) -> Vec<Setting<'a>> {
    let mut out = Vec::new();
    for case in cases {
        for &snr_db in &cfg.snr_db_grid {
            for &rho in &cfg.rho_grid {
                out.push(Setting { case, snr_db, rho });
            }
        }
    }
    out
}

fn model_for(setting: &Setting<'_>) -> anyhow::Result<(MeasurementMatrix64, StateModel64)> {
    let h = dc_jacobian(&setting.case.grid).with_context(|| format!("jacobian of {}", setting.case.label))?;
    let model = StateModel64::toeplitz(&h, setting.rho, setting.snr_db)?;
    Ok((h, model))
}

fn dc_rows(cfg: &ExperimentConfig, experiment: Experiment) -> anyhow::Result<Vec<SweepRow>> {
    cfg.validate(experiment)?;
    let cases = cfg.load_cases()?;
    let tag = experiment_tag(experiment);
    let mut rows = Vec::new();
    for (k, setting) in settings(cfg, &cases).iter().enumerate() {
        let (h, model) = model_for(setting)?;
        let (mu, _) = psd_eigen(&h.signal_covariance(&model.sigma_xx)?, "signal covariance")?;
        let first = k * cfg.lambda_grid.len();
        let block: anyhow::Result<Vec<SweepRow>> = cfg
            .lambda_grid
            .par_iter()
            .enumerate()
            .map(|(j, &lambda)| {
                let seed = derive_seed(cfg.master_seed, &[tag, (first + j) as u64]);
                let attack = optimal_attack(&h, &model, lambda)?;
                let spectrum = spectrum_from_eigenvalues(mu.as_slice(), model.noise_var, lambda, cfg.tau)?;
                let pd_imhof = spectrum.prob_detection()?;
                let rates = empirical_rates_seeded(&h, &model, &attack.sigma_aa, cfg.tau, cfg.mc_trials, seed)?;
                let (pd_upper_bound, bound_t) = if cfg.tau > 1.0 {
                    let b = spectrum.bound()?;
                    (b.bound, b.t)
                } else {
                    (1.0, 0.0)
                };
                Ok(SweepRow {
                    case: setting.case.label.clone(),
                    rho: setting.rho,
                    lambda,
                    snr_db: setting.snr_db,
                    tau: cfg.tau,
                    sigma_delta_sq: 0.0,
                    mi_nats: attack.mi_under_attack,
                    kl_nats: attack.kl_attack,
                    pd_imhof,
                    pd_mc: rates.p_detect,
                    pd_mc_stderr: rates.se_detect,
                    pfa_mc: rates.p_false_alarm,
                    pd_upper_bound,
                    bound_t,
                    seed,
                })
            })
            .collect();
        rows.extend(block?);
    }
    Ok(rows)
}

/// One row per (case, SNR, ρ) at the single configured λ.
pub fn run_rho_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Vec<SweepRow>> {
    dc_rows(cfg, Experiment::RhoSweep)
}

/// One row per (case, SNR, ρ, λ).
pub fn run_lambda_sweep(cfg: &ExperimentConfig) -> anyhow::Result<Vec<SweepRow>> {
    dc_rows(cfg, Experiment::LambdaSweep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcSensitivity {
    pub rows: Vec<SweepRow>,
    pub spreads: Vec<SpreadRow>,
}

struct Draw {
    mi: f64,
    kl: f64,
    pd_exact: f64,
    hits_detect: f64,
    hits_alarm: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Attacks built from the flat-start DC Jacobian, scored against AC Jacobians
/// at randomly perturbed operating points. The noise variance stays at the
/// value implied by the nominal SNR and the DC Jacobian.
pub fn run_ac_sensitivity(cfg: &ExperimentConfig) -> anyhow::Result<AcSensitivity> {
    cfg.validate(Experiment::AcSensitivity)?;
    let cases = cfg.load_cases()?;
    let tag = experiment_tag(Experiment::AcSensitivity);
    let mut rows = Vec::new();
    let mut spreads = Vec::new();
    let mut index = 0u64;
    for setting in settings(cfg, &cases) {
        let (h0, model) = model_for(&setting)?;
        let flat = OperatingPoint64::flat(h0.n());
        let (mu, _) = psd_eigen(&h0.signal_covariance(&model.sigma_xx)?, "signal covariance")?;
        for &sigma_delta_sq in &cfg.sigma_delta_sq_grid {
            for &lambda in &cfg.lambda_grid {
                let seed = derive_seed(cfg.master_seed, &[tag, index]);
                index += 1;
                let draws: anyhow::Result<Vec<Draw>> = (0..cfg.perturbation_draws)
                    .into_par_iter()
                    .map(|d| {
                        let mut rng = stream(seed, &[d as u64, 0]);
                        let point = perturb_point(&flat, sigma_delta_sq, &mut rng)?;
                        let h_true = ac_jacobian_at(&setting.case.grid, &point)?;
                        let attack = mismatched_attack(&h_true, &h0, &model, lambda)?;
                        let cov_clean = model.clean_covariance(&h_true)?;
                        let pd_exact = AttackDetection::new(&cov_clean, &attack.sigma_aa, cfg.tau)?.prob_detection()?;
                        let rates = empirical_rates_seeded(
                            &h_true,
                            &model,
                            &attack.sigma_aa,
                            cfg.tau,
                            cfg.states_per_draw,
                            derive_seed(seed, &[d as u64, 1]),
                        )?;
                        let n = cfg.states_per_draw as f64;
                        Ok(Draw {
                            mi: attack.mi_under_attack,
                            kl: attack.kl_attack,
                            pd_exact,
                            hits_detect: (rates.p_detect * n).round(),
                            hits_alarm: (rates.p_false_alarm * n).round(),
                        })
                    })
                    .collect();
                let draws = draws?;
                let total = (cfg.perturbation_draws * cfg.states_per_draw) as f64;
                let pd_mc = draws.iter().map(|d| d.hits_detect).sum::<f64>() / total;
                let pfa_mc = draws.iter().map(|d| d.hits_alarm).sum::<f64>() / total;
                let (mi, mi_std) = mean_std(draws.iter().map(|d| d.mi));
                let (kl, kl_std) = mean_std(draws.iter().map(|d| d.kl));
                let (pd_imhof, pd_std) = mean_std(draws.iter().map(|d| d.pd_exact));
                // the concentration bound assumes the attack matches the grid
                let (pd_upper_bound, bound_t) = if cfg.tau > 1.0 && sigma_delta_sq == 0.0 {
                    let b = spectrum_from_eigenvalues(mu.as_slice(), model.noise_var, lambda, cfg.tau)?.bound()?;
                    (b.bound, b.t)
                } else {
                    (1.0, 0.0)
                };
                rows.push(SweepRow {
                    case: setting.case.label.clone(),
                    rho: setting.rho,
                    lambda,
                    snr_db: setting.snr_db,
                    tau: cfg.tau,
                    sigma_delta_sq,
                    mi_nats: mi,
                    kl_nats: kl,
                    pd_imhof: pd_imhof.clamp(0.0, 1.0),
                    pd_mc,
                    pd_mc_stderr: (pd_mc * (1.0 - pd_mc) / total).sqrt(),
                    pfa_mc,
                    pd_upper_bound,
                    bound_t,
                    seed,
                });
                spreads.push(SpreadRow {
                    case: setting.case.label.clone(),
                    lambda,
                    sigma_delta_sq,
                    draws: draws.len(),
                    mi_std,
                    kl_std,
                    pd_imhof_std: pd_std,
                    mi_min: draws.iter().map(|d| d.mi).fold(f64::INFINITY, f64::min),
                    mi_max: draws.iter().map(|d| d.mi).fold(f64::NEG_INFINITY, f64::max),
                });
            }
        }
    }
    Ok(AcSensitivity { rows, spreads })
}
