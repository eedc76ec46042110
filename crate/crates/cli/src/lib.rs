//! Deterministic experiment sweeps over the stealth attack model, with CSV
//! output and a JSON run manifest.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{load_case, log2_grid, ConfigError, Experiment, ExperimentConfig, LoadedCase};
pub use output::{
    csv_string, emit_csv, format_g, invariant_violations, parse_csv, write_csv, Manifest, SpreadRow, SweepRow,
};
pub use sweep::{run_ac_sensitivity, run_lambda_sweep, run_rho_sweep, AcSensitivity};
