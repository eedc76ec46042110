use std::path::Path;

use serde::{Deserialize, Serialize};
use stealth_core::{cases, parse_case, GridCase};
use thiserror::Error;

pub const DEFAULT_PERTURBATION_DRAWS: usize = 200;
pub const DEFAULT_STATES_PER_DRAW: usize = 2000;
pub const MIN_MC_TRIALS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("`{0}` grid must not be empty")]
    EmptyGrid(&'static str),
    #[error("invalid {name} = {value}: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("no case given")]
    NoCase,
    #[error("cannot load case `{case}`: {reason}")]
    Case { case: String, reason: String },
}

/// The experiments that a configuration can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RhoSweep,
    LambdaSweep,
    AcSensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Bundled case names or MATPOWER file paths.
    pub case_paths: Vec<String>,
    pub rho_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub snr_db_grid: Vec<f64>,
    pub tau: f64,
    /// Angle perturbation variances in rad²; only used by the AC experiment.
    pub sigma_delta_sq_grid: Vec<f64>,
    pub mc_trials: usize,
    pub perturbation_draws: usize,
    pub states_per_draw: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case_paths: vec!["case30".into()],
            rho_grid: vec![0.1],
            lambda_grid: vec![2.0],
            snr_db_grid: vec![10.0],
            tau: 2.0,
            sigma_delta_sq_grid: Vec::new(),
            mc_trials: 10_000,
            perturbation_draws: DEFAULT_PERTURBATION_DRAWS,
            states_per_draw: DEFAULT_STATES_PER_DRAW,
            master_seed: 1,
        }
    }
}

/// `2^0, 2^1, ..., 2^max_exp`.
pub fn log2_grid(max_exp: u32) -> Vec<f64> {
    (0..=max_exp).map(|k| (1u64 << k) as f64).collect()
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ConfigError {
    ConfigError::Invalid { name, value, reason }
}

impl ExperimentConfig {
    pub fn validate(&self, experiment: Experiment) -> Result<(), ConfigError> {
        if self.case_paths.is_empty() {
            return Err(ConfigError::NoCase);
        }
        for (name, grid) in [
            ("rho", &self.rho_grid),
            ("lambda", &self.lambda_grid),
            ("snr_db", &self.snr_db_grid),
        ] {
            if grid.is_empty() {
                return Err(ConfigError::EmptyGrid(name));
            }
        }
        if experiment == Experiment::RhoSweep && self.lambda_grid.len() != 1 {
            return Err(invalid(
                "lambda",
                self.lambda_grid.len() as f64,
                "a rho sweep runs at a single lambda",
            ));
        }
        if experiment == Experiment::AcSensitivity && self.sigma_delta_sq_grid.is_empty() {
            return Err(ConfigError::EmptyGrid("sigma_delta_sq"));
        }
        for &rho in &self.rho_grid {
            if !(0.0..1.0).contains(&rho) {
                return Err(invalid("rho", rho, "correlation must lie in [0, 1)"));
            }
        }
        for &lambda in &self.lambda_grid {
            if !(lambda >= 1.0) || !lambda.is_finite() {
                return Err(invalid("lambda", lambda, "attack weight must be finite and at least 1"));
            }
        }
        for &snr in &self.snr_db_grid {
            if !snr.is_finite() {
                return Err(invalid("snr_db", snr, "SNR must be finite"));
            }
        }
        for &s in &self.sigma_delta_sq_grid {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(invalid("sigma_delta_sq", s, "variance must be finite and non-negative"));
            }
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid("tau", self.tau, "threshold must be positive and finite"));
        }
        if self.mc_trials < MIN_MC_TRIALS {
            return Err(invalid(
                "mc_trials",
                self.mc_trials as f64,
                "at least 1000 trials are required",
            ));
        }
        if experiment == Experiment::AcSensitivity {
            if self.perturbation_draws == 0 {
                return Err(invalid("perturbation_draws", 0.0, "at least one draw is required"));
            }
            if self.states_per_draw < MIN_MC_TRIALS {
                return Err(invalid(
                    "states_per_draw",
                    self.states_per_draw as f64,
                    "at least 1000 states per draw are required",
                ));
            }
        }
        Ok(())
    }

    /// Load every case, failing on the first that cannot be read or parsed.
    pub fn load_cases(&self) -> Result<Vec<LoadedCase>, ConfigError> {
        self.case_paths.iter().map(|c| load_case(c)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCase {
    /// Label written to the `case` column.
    pub label: String,
    pub grid: GridCase,
}

/// Resolve a bundled case name or a MATPOWER file path.
pub fn load_case(name: &str) -> Result<LoadedCase, ConfigError> {
    let fail = |reason: String| ConfigError::Case {
        case: name.to_string(),
        reason,
    };
    if let Some(text) = cases::source(name) {
        let grid = parse_case(text).map_err(|e| fail(e.to_string()))?;
        return Ok(LoadedCase {
            label: name.to_string(),
            grid,
        });
    }
    let path = Path::new(name);
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let grid = parse_case(&text).map_err(|e| fail(e.to_string()))?;
    let label = if grid.name().is_empty() {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name.to_string())
    } else {
        grid.name().to_string()
    };
    Ok(LoadedCase { label, grid })
}
