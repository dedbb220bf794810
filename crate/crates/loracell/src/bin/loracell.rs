//! Scenario CLI: train and evaluate allocation policies, run the
//! built-in studies, or sweep a scenario over a parameter grid.
//!
//! ```text
//! loracell train --config cell.toml --out results/
//! loracell eval  --config cell.toml --policy drl --out results/
//! loracell run dense --epochs 200 --out results/dense
//! loracell sweep --config cell.toml --param n_eds --values 250,500,1000
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use loracell::harness::{
    preset, run_study, HarnessError, PolicyChoice, RunOptions, Scenario, Study, StudyReport,
};
use loracell::sim::MobilityModel;

#[derive(Parser)]
#[command(
    name = "loracell",
    about = "Single-gateway LoRa cell simulator with learned and rule-based resource allocation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides shared by all verbs.
#[derive(Args, Clone)]
struct Overrides {
    /// Master seed (overrides the scenario value).
    #[arg(long)]
    seed: Option<u64>,
    /// Training epochs (overrides the scenario value).
    #[arg(long)]
    epochs: Option<u64>,
    /// Independent replications to aggregate.
    #[arg(long)]
    replications: Option<u32>,
    /// Output directory for CSV files, plot data, and checkpoints.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Restrict the run to a single policy (drl, rule, exp3, random).
    #[arg(long)]
    policy: Option<PolicyChoice>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured policies and save checkpoints.
    Train {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate previously trained checkpoints (no training).
    Eval {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a built-in study end to end: mobility, dense, mac, or jamming.
    Run {
        /// Preset name.
        preset: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a scenario once per value of a swept parameter.
    Sweep {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Swept parameter: n_eds, channels, or velocity_kmh.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn apply_overrides(study: &mut Study, o: &Overrides) {
    if let Some(seed) = o.seed {
        study.seed = seed;
    }
    if let Some(epochs) = o.epochs {
        study.epochs = epochs;
    }
    if let Some(reps) = o.replications {
        study.replications = reps;
    }
    if let Some(policy) = o.policy {
        study.retain_policy(policy);
    }
}

/// Expands a scenario into one condition per swept value.
fn sweep_study(scenario: Scenario, param: &str, values: &str) -> Result<Study, HarnessError> {
    let mut study = scenario.into_study();
    let base = study.conditions[0].sim.clone();
    let mut conditions = Vec::new();
    for raw in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut sim = base.clone();
        let label;
        match param {
            "n_eds" => {
                sim.n_eds = raw.parse().map_err(|_| bad_value(param, raw))?;
                label = format!("n{raw}");
            }
            "channels" => {
                sim.channels = raw.parse().map_err(|_| bad_value(param, raw))?;
                label = format!("ch{raw}");
            }
            "velocity_kmh" => {
                let v: f64 = raw.parse().map_err(|_| bad_value(param, raw))?;
                sim.mobility = if v == 0.0 {
                    MobilityModel::Static
                } else {
                    MobilityModel::GaussMarkov {
                        mean_velocity_kmh: v,
                        velocity_sigma_kmh: v / 3.0,
                        heading_sigma_rad: 0.5,
                        alpha: 0.75,
                        step_s: 60.0,
                    }
                };
                label = format!("v{raw}");
            }
            other => {
                return Err(HarnessError::InvalidStudy(format!(
                    "unknown sweep parameter `{other}` (expected n_eds, channels, or velocity_kmh)"
                )))
            }
        }
        conditions.push(loracell::harness::Condition { label, sim });
    }
    if conditions.is_empty() {
        return Err(HarnessError::InvalidStudy("no sweep values given".into()));
    }
    study.conditions = conditions;
    Ok(study)
}

fn bad_value(param: &str, raw: &str) -> HarnessError {
    HarnessError::InvalidStudy(format!("cannot parse `{raw}` as a value for {param}"))
}

fn print_summary(report: &StudyReport) {
    if report.summary.is_empty() {
        println!("done; curves and checkpoints written to {}", report.out_dir.display());
        return;
    }
    println!("{:<12} {:<8} {:>9} {:>9} {:>12}", "condition", "policy", "pdr", "ci95", "energy_mj");
    for (condition, row) in &report.summary {
        println!(
            "{:<12} {:<8} {:>9.4} {:>9.4} {:>12.4}",
            condition, row.policy, row.pdr_mean, row.pdr_ci95, row.energy_mj_mean
        );
    }
    println!("files under {}", report.out_dir.display());
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, overrides } => {
            let mut study = Scenario::load(&config)?.into_study();
            apply_overrides(&mut study, &overrides);
            study.eval_episodes = 0;
            let opts = RunOptions { verbose: true, ..RunOptions::default() };
            let report = run_study(&study, &overrides.out, &opts)?;
            print_summary(&report);
        }
        Command::Eval { config, overrides } => {
            let mut study = Scenario::load(&config)?.into_study();
            apply_overrides(&mut study, &overrides);
            study.epochs = 0;
            let opts =
                RunOptions { load_checkpoints: true, save_checkpoints: false, verbose: true };
            let report = run_study(&study, &overrides.out, &opts)?;
            print_summary(&report);
        }
        Command::Run { preset: name, overrides } => {
            let mut study = preset(&name)?;
            apply_overrides(&mut study, &overrides);
            let opts = RunOptions { verbose: true, ..RunOptions::default() };
            let report = run_study(&study, &overrides.out, &opts)?;
            print_summary(&report);
        }
        Command::Sweep { config, param, values, overrides } => {
            let scenario = Scenario::load(&config)?;
            let mut study = sweep_study(scenario, &param, &values)?;
            apply_overrides(&mut study, &overrides);
            let opts = RunOptions { verbose: true, ..RunOptions::default() };
            let report = run_study(&study, &overrides.out, &opts)?;
            print_summary(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
