use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// One output line of a sweep. Column order follows field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub case: String,
    pub rho: f64,
    pub lambda: f64,
    pub snr_db: f64,
    pub tau: f64,
    pub sigma_delta_sq: f64,
    pub mi_nats: f64,
    pub kl_nats: f64,
    pub pd_imhof: f64,
    pub pd_mc: f64,
    pub pd_mc_stderr: f64,
    pub pfa_mc: f64,
    pub pd_upper_bound: f64,
    pub bound_t: f64,
    pub seed: u64,
}

pub const HEADER: [&str; 15] = [
    "case",
    "rho",
    "lambda",
    "snr_db",
    "tau",
    "sigma_delta_sq",
    "mi_nats",
    "kl_nats",
    "pd_imhof",
    "pd_mc",
    "pd_mc_stderr",
    "pfa_mc",
    "pd_upper_bound",
    "bound_t",
    "seed",
];

/// Spread of the per-draw quantities behind an averaged AC row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub case: String,
    pub lambda: f64,
    pub sigma_delta_sq: f64,
    pub draws: usize,
    pub mi_std: f64,
    pub kl_std: f64,
    pub pd_imhof_std: f64,
    pub mi_min: f64,
    pub mi_max: f64,
}

/// C-style `%.{digits}g`.
pub fn format_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn row_fields(row: &SweepRow) -> Vec<String> {
    let g = |x: f64| format_g(x, SIGNIFICANT_DIGITS);
    vec![
        row.case.clone(),
        g(row.rho),
        g(row.lambda),
        g(row.snr_db),
        g(row.tau),
        g(row.sigma_delta_sq),
        g(row.mi_nats),
        g(row.kl_nats),
        g(row.pd_imhof),
        g(row.pd_mc),
        g(row.pd_mc_stderr),
        g(row.pfa_mc),
        g(row.pd_upper_bound),
        g(row.bound_t),
        row.seed.to_string(),
    ]
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(HEADER)?;
    for row in rows {
        out.write_record(row_fields(row))?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    write_csv(rows, std::io::BufWriter::new(file))?;
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn parse_csv<R: Read>(r: R) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn write_spread_csv<W: Write>(rows: &[SpreadRow], w: W) -> csv::Result<()> {
    let g = |x: f64| format_g(x, SIGNIFICANT_DIGITS);
    let mut out = writer(w);
    out.write_record([
        "case",
        "lambda",
        "sigma_delta_sq",
        "draws",
        "mi_std",
        "kl_std",
        "pd_imhof_std",
        "mi_min",
        "mi_max",
    ])?;
    for r in rows {
        out.write_record([
            r.case.clone(),
            g(r.lambda),
            g(r.sigma_delta_sq),
            r.draws.to_string(),
            g(r.mi_std),
            g(r.kl_std),
            g(r.pd_imhof_std),
            g(r.mi_min),
            g(r.mi_max),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `out.csv` → `out.<suffix>`.
pub fn sibling_path(csv_path: &Path, suffix: &str) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub versions: Versions,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versions {
    #[serde(rename = "stealth-cli")]
    pub cli: String,
    #[serde(rename = "stealth-core")]
    pub core: String,
}

impl Manifest {
    pub fn new(experiment: Experiment, config: &ExperimentConfig, rows: usize) -> Self {
        Self {
            experiment,
            seed: config.master_seed,
            config: config.clone(),
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION").to_string(),
                core: stealth_core::VERSION.to_string(),
            },
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            rows,
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        Ok(())
    }
}

/// Describe every row that breaks a row invariant; empty when all hold.
pub fn invariant_violations(rows: &[SweepRow]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        for (name, v) in [
            ("pd_imhof", r.pd_imhof),
            ("pd_mc", r.pd_mc),
            ("pfa_mc", r.pfa_mc),
            ("pd_upper_bound", r.pd_upper_bound),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!(
                    "row {i} ({}, lambda {}): {name} = {v} outside [0, 1]",
                    r.case, r.lambda
                ));
            }
        }
        if r.tau > 1.0 && r.lambda >= 1.0 && r.pd_imhof > r.pd_upper_bound + 3.0 * r.pd_mc_stderr {
            out.push(format!(
                "row {i} ({}, lambda {}): pd_imhof {} exceeds bound {}",
                r.case, r.lambda, r.pd_imhof, r.pd_upper_bound
            ));
        }
    }
    out
}
