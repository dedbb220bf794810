//! Study execution: train, evaluate, replicate, aggregate, emit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::policy::{
    ActionSpace, AllocationPolicy, DrlPolicy, Exp3Policy, RandomPolicy, RuleBasedPolicy,
};
use crate::sim::{stream_seed, EpochMetrics, Simulation};

use super::config::{Condition, PolicyChoice, Study};
use super::output::{mean_ci95, write_csv, write_plotdata, CsvRow};
use super::HarnessError;

/// Per-policy label of the spreading factor axis.
const SPREADING_FACTORS: [u8; 6] = [7, 8, 9, 10, 11, 12];

/// Execution switches of [`run_study`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Initialise learned policies from previously saved checkpoints
    /// instead of fresh weights (the `eval` verb).
    pub load_checkpoints: bool,
    /// Save learned policies after training.
    pub save_checkpoints: bool,
    /// Print one progress line per finished replication to stderr.
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { load_checkpoints: false, save_checkpoints: true, verbose: false }
    }
}

/// Everything a study run produced, with the aggregated rows kept
/// in memory for programmatic consumers alongside the emitted files.
#[derive(Debug)]
pub struct StudyReport {
    pub out_dir: PathBuf,
    /// One entry per (condition, policy): condition label plus the
    /// steady-state evaluation row.
    pub summary: Vec<(String, CsvRow)>,
    /// Aggregated training curves keyed by (condition, policy) labels.
    pub train_curves: BTreeMap<(String, String), Vec<CsvRow>>,
    /// Aggregated evaluation curves, same keys.
    pub eval_curves: BTreeMap<(String, String), Vec<CsvRow>>,
    pub files: Vec<PathBuf>,
}

impl StudyReport {
    /// Convenience lookup: summary PDR for a condition/policy pair.
    pub fn summary_pdr(&self, condition: &str, policy: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|(c, r)| c == condition && r.policy == policy)
            .map(|(_, r)| r.pdr_mean)
    }
}

/// One concrete policy instance. An enum rather than a boxed trait so
/// the runner can reach learned-policy specifics (checkpoints).
pub enum PolicyInstance {
    Drl(Box<DrlPolicy>),
    Rule(RuleBasedPolicy),
    Exp3(Exp3Policy),
    Random(RandomPolicy),
}

impl PolicyInstance {
    pub fn as_dyn_mut(&mut self) -> &mut dyn AllocationPolicy {
        match self {
            PolicyInstance::Drl(p) => &mut **p,
            PolicyInstance::Rule(p) => p,
            PolicyInstance::Exp3(p) => p,
            PolicyInstance::Random(p) => p,
        }
    }

    pub fn drl(&self) -> Option<&DrlPolicy> {
        match self {
            PolicyInstance::Drl(p) => Some(p),
            _ => None,
        }
    }

    pub fn drl_mut(&mut self) -> Option<&mut DrlPolicy> {
        match self {
            PolicyInstance::Drl(p) => Some(p),
            _ => None,
        }
    }
}

/// The action space used by every policy of a study under `condition`.
pub fn build_space(study: &Study, condition: &Condition) -> Result<ActionSpace, HarnessError> {
    ActionSpace::new(
        condition.sim.channels,
        SPREADING_FACTORS.to_vec(),
        study.powers_dbm.clone(),
        125_000,
        5,
    )
    .map_err(HarnessError::from)
}

/// Instantiates one policy with a replication-specific seed.
pub fn build_policy(
    study: &Study,
    condition: &Condition,
    choice: PolicyChoice,
    seed: u64,
) -> Result<PolicyInstance, HarnessError> {
    let space = build_space(study, condition)?;
    Ok(match choice {
        PolicyChoice::Drl => PolicyInstance::Drl(Box::new(DrlPolicy::new(
            space,
            study.agent.clone(),
            study.reward,
            seed,
        )?)),
        PolicyChoice::Rule => {
            PolicyInstance::Rule(RuleBasedPolicy::new(space, condition.sim.phy.clone(), seed))
        }
        PolicyChoice::Exp3 => {
            PolicyInstance::Exp3(Exp3Policy::new(space, study.exp3_eta, study.exp3_eta_mix, seed))
        }
        PolicyChoice::Random => PolicyInstance::Random(RandomPolicy::new(space, seed)),
    })
}

/// Canonical checkpoint location for one trained replication.
pub fn checkpoint_path(out_dir: &Path, condition: &str, policy: PolicyChoice, rep: u32) -> PathBuf {
    out_dir.join(format!("model_{}_{}_rep{}.qnet", policy.label(), condition, rep))
}

/// Steady-state tail of an evaluation run: transmissions from the last
/// fifth of each episode, where the cell is at or near full population.
#[derive(Debug, Clone, Copy, Default)]
struct WindowStats {
    sent: u64,
    delivered: u64,
    per_sf_sent: [u64; 6],
    per_sf_delivered: [u64; 6],
    energy_j: f64,
}

impl WindowStats {
    fn absorb(&mut self, m: &EpochMetrics) {
        self.sent += m.sent;
        self.delivered += m.delivered;
        for i in 0..6 {
            self.per_sf_sent[i] += m.per_sf_sent[i];
            self.per_sf_delivered[i] += m.per_sf_delivered[i];
        }
        self.energy_j += m.energy_mj_mean / 1000.0 * m.sent as f64;
    }

    fn pdr(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.delivered as f64 / self.sent as f64
        }
    }

    fn energy_mj_mean(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            1000.0 * self.energy_j / self.sent as f64
        }
    }

    fn per_sf_alloc(&self) -> [f64; 6] {
        if self.sent == 0 {
            return [0.0; 6];
        }
        self.per_sf_sent.map(|n| n as f64 / self.sent as f64)
    }

    fn per_sf_pdr(&self) -> [f64; 6] {
        std::array::from_fn(|i| {
            if self.per_sf_sent[i] > 0 {
                self.per_sf_delivered[i] as f64 / self.per_sf_sent[i] as f64
            } else {
                0.0
            }
        })
    }
}

/// Selects the epochs whose end falls in the last fifth of an episode
/// and folds them into one stat block. Falls back to all epochs if the
/// grid is too coarse for the selection to catch anything.
fn steady_window(epochs: &[EpochMetrics], epoch_s: f64, episode_s: f64) -> WindowStats {
    let tail = |m: &&EpochMetrics| {
        let end_s = (m.epoch + 1) as f64 * epoch_s;
        let pos = (end_s - 1e-6).rem_euclid(episode_s) / episode_s;
        pos >= 0.8
    };
    let mut stats = WindowStats::default();
    let mut any = false;
    for m in epochs.iter().filter(tail) {
        stats.absorb(m);
        any = true;
    }
    if !any {
        for m in epochs {
            stats.absorb(m);
        }
    }
    stats
}

fn load_checkpoint(policy: &mut PolicyInstance, ckpt: &Path) -> Result<(), HarnessError> {
    if let Some(drl) = policy.drl_mut() {
        drl.agent_mut().load_weights(ckpt).map_err(|e| HarnessError::Checkpoint {
            path: ckpt.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

/// Saves the policy if it has weights to save; reports whether it did.
fn save_checkpoint(policy: &PolicyInstance, ckpt: &Path) -> Result<bool, HarnessError> {
    match policy.drl() {
        Some(drl) => {
            drl.agent().save(ckpt).map_err(|e| HarnessError::Checkpoint {
                path: ckpt.display().to_string(),
                message: e.to_string(),
            })?;
            Ok(true)
        }
        None => Ok(false),
    }
}

/// Runs `study.epochs` worth of training episodes on one condition and
/// returns the per-epoch metrics.
fn train_phase(
    study: &Study,
    condition: &Condition,
    policy: &mut PolicyInstance,
    rep: u32,
) -> Result<Vec<EpochMetrics>, HarnessError> {
    let mut cfg = condition.sim.clone();
    cfg.seed = stream_seed(study.seed, rep.into(), 10);
    let epoch_s = cfg.effective_epoch_s();
    let mut sim = Simulation::new(cfg)?;
    policy.as_dyn_mut().set_eval(false);
    let target_s = study.epochs as f64 * epoch_s;
    let mut train = Vec::new();
    while sim.clock_s() + 1e-6 < target_s {
        sim.run_episode(policy.as_dyn_mut())?;
        train.extend(sim.take_completed_epochs());
    }
    train.extend(sim.flush_epochs());
    train.retain(|m| m.epoch < study.epochs);
    Ok(train)
}

/// Runs the frozen-policy evaluation episodes on one condition.
fn eval_phase(
    study: &Study,
    condition: &Condition,
    policy: &mut PolicyInstance,
    rep: u32,
) -> Result<(Vec<EpochMetrics>, WindowStats), HarnessError> {
    let mut cfg = condition.sim.clone();
    cfg.seed = stream_seed(study.seed, rep.into(), 12);
    let epoch_s = cfg.effective_epoch_s();
    let episode_s = cfg.n_eds as f64 * cfg.effective_step_window_s();
    let mut sim = Simulation::new(cfg)?;
    policy.as_dyn_mut().set_eval(true);
    let mut eval = Vec::new();
    for _ in 0..study.eval_episodes {
        sim.run_episode(policy.as_dyn_mut())?;
        eval.extend(sim.take_completed_epochs());
    }
    eval.extend(sim.flush_epochs());
    let window = steady_window(&eval, epoch_s, episode_s);
    Ok((eval, window))
}

/// Everything one policy produced across replications, keyed by
/// condition label.
#[derive(Default)]
struct PolicyRuns {
    train: BTreeMap<String, Vec<Vec<EpochMetrics>>>,
    eval: BTreeMap<String, Vec<Vec<EpochMetrics>>>,
    windows: BTreeMap<String, Vec<WindowStats>>,
}

fn run_policy(
    study: &Study,
    choice: PolicyChoice,
    out_dir: &Path,
    opts: &RunOptions,
    files: &mut Vec<PathBuf>,
) -> Result<PolicyRuns, HarnessError> {
    let mut runs = PolicyRuns::default();
    for rep in 0..study.replications {
        match study.training_condition() {
            // Shared-training mode: one instance per replication,
            // trained on the designated condition (only the learned
            // allocator has cross-episode state worth training), then
            // evaluated under every condition.
            Some(tc) => {
                let mut policy =
                    build_policy(study, tc, choice, stream_seed(study.seed, rep.into(), 11))?;
                let ckpt = checkpoint_path(out_dir, &tc.label, choice, rep);
                if opts.load_checkpoints {
                    load_checkpoint(&mut policy, &ckpt)?;
                }
                if study.epochs > 0 && choice == PolicyChoice::Drl {
                    let curve = train_phase(study, tc, &mut policy, rep)?;
                    if opts.verbose {
                        let last = curve.last().map_or(f64::NAN, |m| m.pdr);
                        eprintln!(
                            "  [{}] rep {rep}: trained on {} for {} epochs, last pdr {last:.3}",
                            choice.label(),
                            tc.label,
                            curve.len(),
                        );
                    }
                    if opts.save_checkpoints && save_checkpoint(&policy, &ckpt)? {
                        files.push(ckpt);
                    }
                    runs.train.entry(tc.label.clone()).or_default().push(curve);
                }
                if study.eval_episodes > 0 {
                    for condition in &study.conditions {
                        let (curve, w) = eval_phase(study, condition, &mut policy, rep)?;
                        if opts.verbose {
                            eprintln!(
                                "  [{}] rep {rep}: eval {} pdr {:.3}",
                                choice.label(),
                                condition.label,
                                w.pdr(),
                            );
                        }
                        runs.eval.entry(condition.label.clone()).or_default().push(curve);
                        runs.windows.entry(condition.label.clone()).or_default().push(w);
                    }
                }
            }
            // Per-condition mode: a fresh instance per condition.
            None => {
                for condition in &study.conditions {
                    let mut policy = build_policy(
                        study,
                        condition,
                        choice,
                        stream_seed(study.seed, rep.into(), 11),
                    )?;
                    let ckpt = checkpoint_path(out_dir, &condition.label, choice, rep);
                    if opts.load_checkpoints {
                        load_checkpoint(&mut policy, &ckpt)?;
                    }
                    if study.epochs > 0 {
                        let curve = train_phase(study, condition, &mut policy, rep)?;
                        if opts.verbose {
                            let last = curve.last().map_or(f64::NAN, |m| m.pdr);
                            eprintln!(
                                "  [{}] rep {rep}: trained on {} for {} epochs, last pdr {last:.3}",
                                choice.label(),
                                condition.label,
                                curve.len(),
                            );
                        }
                        if opts.save_checkpoints && save_checkpoint(&policy, &ckpt)? {
                            files.push(ckpt);
                        }
                        runs.train.entry(condition.label.clone()).or_default().push(curve);
                    }
                    if study.eval_episodes > 0 {
                        let (curve, w) = eval_phase(study, condition, &mut policy, rep)?;
                        if opts.verbose {
                            eprintln!(
                                "  [{}] rep {rep}: eval {} pdr {:.3}",
                                choice.label(),
                                condition.label,
                                w.pdr(),
                            );
                        }
                        runs.eval.entry(condition.label.clone()).or_default().push(curve);
                        runs.windows.entry(condition.label.clone()).or_default().push(w);
                    }
                }
            }
        }
    }
    Ok(runs)
}

/// Merges per-replication epoch series into CSV rows: mean PDR with a
/// 95% confidence half-width, plus plain means of the other metrics.
/// Only epochs present in every replication are emitted.
fn aggregate_curves(
    reps: &[Vec<EpochMetrics>],
    condition: &Condition,
    policy: PolicyChoice,
    seed: u64,
) -> Vec<CsvRow> {
    let mut by_epoch: BTreeMap<u64, Vec<&EpochMetrics>> = BTreeMap::new();
    for rep in reps {
        for m in rep {
            by_epoch.entry(m.epoch).or_default().push(m);
        }
    }
    by_epoch
        .into_iter()
        .filter(|(_, ms)| ms.len() == reps.len())
        .map(|(epoch, ms)| {
            let pdrs: Vec<f64> = ms.iter().map(|m| m.pdr).collect();
            let (pdr_mean, pdr_ci95) = mean_ci95(&pdrs);
            let n = ms.len() as f64;
            let mut per_sf_alloc = [0.0; 6];
            let mut per_sf_pdr = [0.0; 6];
            for m in &ms {
                for i in 0..6 {
                    per_sf_alloc[i] += m.per_sf_alloc[i] / n;
                    per_sf_pdr[i] += m.per_sf_pdr[i] / n;
                }
            }
            CsvRow {
                epoch,
                policy: policy.label().into(),
                n_eds: condition.sim.n_eds,
                velocity_kmh: condition.velocity_kmh(),
                channels: condition.sim.channels,
                pdr_mean,
                pdr_ci95,
                energy_mj_mean: ms.iter().map(|m| m.energy_mj_mean).sum::<f64>() / n,
                per_sf_alloc,
                per_sf_pdr,
                seed,
            }
        })
        .collect()
}

fn summary_row(
    windows: &[WindowStats],
    condition: &Condition,
    policy: PolicyChoice,
    study: &Study,
) -> CsvRow {
    let pdrs: Vec<f64> = windows.iter().map(WindowStats::pdr).collect();
    let (pdr_mean, pdr_ci95) = mean_ci95(&pdrs);
    let n = windows.len() as f64;
    let mut per_sf_alloc = [0.0; 6];
    let mut per_sf_pdr = [0.0; 6];
    for w in windows {
        let a = w.per_sf_alloc();
        let p = w.per_sf_pdr();
        for i in 0..6 {
            per_sf_alloc[i] += a[i] / n;
            per_sf_pdr[i] += p[i] / n;
        }
    }
    CsvRow {
        epoch: study.epochs,
        policy: policy.label().into(),
        n_eds: condition.sim.n_eds,
        velocity_kmh: condition.velocity_kmh(),
        channels: condition.sim.channels,
        pdr_mean,
        pdr_ci95,
        energy_mj_mean: windows.iter().map(WindowStats::energy_mj_mean).sum::<f64>() / n,
        per_sf_alloc,
        per_sf_pdr,
        seed: study.seed,
    }
}

/// Runs a full study: every condition x policy x replication, with
/// aggregated CSV curves, a summary table, plot data, and checkpoints
/// under `out_dir`.
pub fn run_study(
    study: &Study,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<StudyReport, HarnessError> {
    study.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut report = StudyReport {
        out_dir: out_dir.to_path_buf(),
        summary: Vec::new(),
        train_curves: BTreeMap::new(),
        eval_curves: BTreeMap::new(),
        files: Vec::new(),
    };

    for &choice in &study.policies {
        if opts.verbose {
            eprintln!("policy {}:", choice.label());
        }
        let runs = run_policy(study, choice, out_dir, opts, &mut report.files)?;
        for condition in &study.conditions {
            let key = (condition.label.clone(), choice.label().to_string());
            if let Some(reps) = runs.train.get(&condition.label) {
                let rows = aggregate_curves(reps, condition, choice, study.seed);
                let path =
                    out_dir.join(format!("train_{}_{}.csv", choice.label(), condition.label));
                write_csv(&path, &rows)?;
                report.files.push(path);
                report.train_curves.insert(key.clone(), rows);
            }
            if let Some(reps) = runs.eval.get(&condition.label) {
                let rows = aggregate_curves(reps, condition, choice, study.seed);
                let path = out_dir.join(format!("eval_{}_{}.csv", choice.label(), condition.label));
                write_csv(&path, &rows)?;
                report.files.push(path);
                report.eval_curves.insert(key, rows);
                let windows = &runs.windows[&condition.label];
                report.summary.push((
                    condition.label.clone(),
                    summary_row(windows, condition, choice, study),
                ));
            }
        }
    }

    // Condition-major summary order, whatever the execution order was.
    let cond_pos = |label: &str| study.conditions.iter().position(|c| c.label == label);
    let pol_pos = |label: &str| study.policies.iter().position(|p| p.label() == label);
    report.summary.sort_by_key(|(c, r)| (cond_pos(c), pol_pos(&r.policy)));

    if !report.summary.is_empty() {
        let rows: Vec<CsvRow> = report.summary.iter().map(|(_, r)| r.clone()).collect();
        let path = out_dir.join("summary.csv");
        write_csv(&path, &rows)?;
        report.files.push(path);
    }
    emit_plotdata(study, &mut report)?;
    Ok(report)
}

/// Condition axis for summary plots: device count if it varies,
/// then velocity, then plain condition index.
fn condition_axis(study: &Study) -> Vec<f64> {
    let n_eds: Vec<usize> = study.conditions.iter().map(|c| c.sim.n_eds).collect();
    if n_eds.windows(2).any(|w| w[0] != w[1]) {
        return n_eds.into_iter().map(|n| n as f64).collect();
    }
    let vel: Vec<f64> = study.conditions.iter().map(Condition::velocity_kmh).collect();
    if vel.windows(2).any(|w| w[0] != w[1]) {
        return vel;
    }
    (0..study.conditions.len()).map(|i| i as f64).collect()
}

fn emit_plotdata(study: &Study, report: &mut StudyReport) -> Result<(), HarnessError> {
    if !report.train_curves.is_empty() {
        let series: Vec<(String, Vec<(f64, f64)>)> = report
            .train_curves
            .iter()
            .map(|((cond, policy), rows)| {
                (
                    format!("{policy}_{cond}"),
                    rows.iter().map(|r| (r.epoch as f64, r.pdr_mean)).collect(),
                )
            })
            .collect();
        let path = report.out_dir.join("plot_pdr_vs_epoch.dat");
        write_plotdata(&path, &series)?;
        report.files.push(path);
    }
    if !report.summary.is_empty() {
        let axis = condition_axis(study);
        let mut series = Vec::new();
        for &choice in &study.policies {
            let mut points = Vec::new();
            for (i, condition) in study.conditions.iter().enumerate() {
                if let Some((_, row)) = report
                    .summary
                    .iter()
                    .find(|(c, r)| c == &condition.label && r.policy == choice.label())
                {
                    points.push((axis[i], row.pdr_mean));
                }
            }
            if !points.is_empty() {
                series.push((choice.label().to_string(), points));
            }
        }
        let path = report.out_dir.join("plot_pdr_summary.dat");
        write_plotdata(&path, &series)?;
        report.files.push(path);
    }
    Ok(())
}
