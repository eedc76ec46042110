use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use stealth_cli::output::{sibling_path, write_spread_csv};
use stealth_cli::{
    csv_string, emit_csv, invariant_violations, load_case, log2_grid, run_ac_sensitivity, run_lambda_sweep,
    run_rho_sweep, Experiment, ExperimentConfig, Manifest, SweepRow,
};
use stealth_core::linalg::singular_values;
use stealth_core::{dc_jacobian, MeasurementMatrix64};

#[derive(Parser)]
#[command(name = "stealth", version, about = "Generalized stealth attack experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the state correlation at a fixed attack weight.
    RhoSweep(SweepArgs),
    /// Sweep the attack weight (default 2^0 .. 2^10).
    LambdaSweep(SweepArgs),
    /// Attack built on the DC model, scored on perturbed AC Jacobians.
    AcSensitivity(AcArgs),
    /// Print bus, branch and measurement counts for a case.
    CaseInfo(InfoArgs),
}

#[derive(Args, Clone)]
struct SweepArgs {
    /// Bundled case (toy2, case14, case30, case118) or MATPOWER file; repeatable.
    #[arg(long = "case")]
    cases: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    /// Monte Carlo trials per point.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; a manifest is written beside it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AcArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Angle perturbation variances in rad².
    #[arg(long = "sigma-delta-sq", value_delimiter = ',')]
    sigma_delta_sq: Vec<f64>,
    #[arg(long, default_value_t = stealth_cli::config::DEFAULT_PERTURBATION_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = stealth_cli::config::DEFAULT_STATES_PER_DRAW)]
    states: usize,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long = "case", required = true)]
    cases: Vec<String>,
    /// Write the DC measurement matrix of the (single) case to this CSV.
    #[arg(long)]
    dump_h: Option<PathBuf>,
}

fn or_default<T: Clone>(given: &[T], default: &[T]) -> Vec<T> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

fn config(args: &SweepArgs, cases: &[&str], lambdas: &[f64]) -> ExperimentConfig {
    ExperimentConfig {
        case_paths: or_default(&args.cases, &cases.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
        rho_grid: or_default(&args.rho, &[0.1]),
        lambda_grid: or_default(&args.lambda, lambdas),
        snr_db_grid: or_default(&args.snr_db, &[10.0]),
        tau: args.tau,
        mc_trials: args.trials,
        master_seed: args.seed,
        ..ExperimentConfig::default()
    }
}

enum Failure {
    Usage(anyhow::Error),
    Invariant(Vec<String>),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn publish(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    rows: &[SweepRow],
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            emit_csv(rows, path)?;
            Manifest::new(experiment, cfg, rows.len()).write(&sibling_path(path, "manifest.json"))?;
        }
        None => {
            std::io::stdout()
                .write_all(csv_string(rows).as_bytes())
                .map_err(anyhow::Error::from)?;
        }
    }
    let violations = invariant_violations(rows);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(violations))
    }
}

fn case_info(args: &InfoArgs) -> anyhow::Result<()> {
    if args.dump_h.is_some() && args.cases.len() != 1 {
        anyhow::bail!("--dump-h takes exactly one --case");
    }
    for name in &args.cases {
        let case = load_case(name)?;
        let h: MeasurementMatrix64 = dc_jacobian(&case.grid)?;
        let summary = case.grid.summary();
        let sv = singular_values(&h.h);
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > 1e-10 * top).count();
        println!("case: {}", case.label);
        println!("buses: {}", summary.n_bus);
        println!("branches_in_service: {}", summary.n_branch_in_service);
        println!("slack_bus: {}", summary.slack_id);
        println!("measurements: {}", h.m());
        println!("states: {}", h.n());
        println!("rank_h: {rank}");
        if let Some(path) = &args.dump_h {
            let file = std::fs::File::create(path)?;
            h.write_csv(std::io::BufWriter::new(file))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RhoSweep(args) => {
            let cfg = config(&args, &["case30"], &[2.0]);
            let rows = run_rho_sweep(&cfg)?;
            publish(Experiment::RhoSweep, &cfg, &rows, args.out.as_ref())
        }
        Command::LambdaSweep(args) => {
            let cfg = config(&args, &["case14", "case30", "case118"], &log2_grid(10));
            let rows = run_lambda_sweep(&cfg)?;
            publish(Experiment::LambdaSweep, &cfg, &rows, args.out.as_ref())
        }
        Command::AcSensitivity(args) => {
            let mut cfg = config(&args.sweep, &["case14", "case30"], &[2.0]);
            cfg.sigma_delta_sq_grid = or_default(&args.sigma_delta_sq, &[0.0, 1e-3, 1e-2, 1e-1]);
            cfg.perturbation_draws = args.draws;
            cfg.states_per_draw = args.states;
            let result = run_ac_sensitivity(&cfg)?;
            if let Some(path) = &args.sweep.out {
                let spread = sibling_path(path, "spread.csv");
                let file = std::fs::File::create(&spread).map_err(anyhow::Error::from)?;
                write_spread_csv(&result.spreads, std::io::BufWriter::new(file)).map_err(anyhow::Error::from)?;
            }
            publish(Experiment::AcSensitivity, &cfg, &result.rows, args.sweep.out.as_ref())
        }
        Command::CaseInfo(args) => Ok(case_info(&args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(violations)) => {
            for v in &violations {
                eprintln!("invariant violated: {v}");
            }
            ExitCode::from(2)
        }
    }
}
