//! Scenario files and the in-memory study description.
//!
//! A scenario TOML file mirrors [`Scenario`] field for field; unknown
//! keys are hard errors so typos cannot silently fall back to defaults.
//! Internally every workload becomes a [`Study`]: a list of labelled
//! simulation conditions crossed with a list of policies.

use std::path::Path;
use std::str::FromStr;

use crate::agent::{AgentConfig, RewardWeights};
use crate::sim::{JamConfig, MobilityModel, SimConfig};

use super::HarnessError;

/// Which allocation policy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Drl,
    Rule,
    Exp3,
    Random,
}

impl PolicyChoice {
    pub const ALL: [PolicyChoice; 4] =
        [PolicyChoice::Drl, PolicyChoice::Rule, PolicyChoice::Exp3, PolicyChoice::Random];

    /// Stable label used in CSV rows, file names, and `--policy`.
    pub fn label(self) -> &'static str {
        match self {
            PolicyChoice::Drl => "drl",
            PolicyChoice::Rule => "rule",
            PolicyChoice::Exp3 => "exp3",
            PolicyChoice::Random => "random",
        }
    }
}

impl FromStr for PolicyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyChoice::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected drl, rule, exp3, or random)"))
    }
}

/// A named, self-contained experiment description loadable from TOML.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub sim: SimConfig,
    pub agent: AgentConfig,
    pub reward: RewardWeights,
    pub policies: Vec<PolicyChoice>,
    /// Training length in metric epochs.
    pub epochs: u64,
    /// Post-training evaluation length in episodes.
    pub eval_episodes: u32,
    pub replications: u32,
    pub seed: u64,
    /// Transmit-power axis of the action space, dBm, ascending.
    pub powers_dbm: Vec<i8>,
    pub exp3_eta: f64,
    pub exp3_eta_mix: f64,
    /// Convenience override for `sim.jam`.
    pub jam_schedule: Option<JamConfig>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            sim: SimConfig::default(),
            agent: AgentConfig::default(),
            reward: RewardWeights::default(),
            policies: vec![PolicyChoice::Drl],
            epochs: 2000,
            eval_episodes: 5,
            replications: 1,
            seed: 1,
            powers_dbm: vec![14],
            exp3_eta: 0.3,
            exp3_eta_mix: 0.1,
            jam_schedule: None,
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let scenario: Scenario = toml::from_str(&text).map_err(|e| HarnessError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidStudy(m));
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.jam_schedule.is_some() && self.sim.channels < 2 {
            return bad("a jam schedule needs at least two channels".into());
        }
        let mut sim = self.sim.clone();
        if self.jam_schedule.is_some() {
            sim.jam = self.jam_schedule;
        }
        sim.validate().map_err(|e| HarnessError::InvalidStudy(e.to_string()))?;
        self.agent.validate().map_err(|e| HarnessError::InvalidStudy(e.to_string()))?;
        if self.powers_dbm.is_empty() {
            return bad("powers_dbm must not be empty".into());
        }
        if self.exp3_eta.is_nan()
            || self.exp3_eta <= 0.0
            || !(0.0..=1.0).contains(&self.exp3_eta_mix)
        {
            return bad("exp3_eta must be positive and exp3_eta_mix in [0, 1]".into());
        }
        Ok(())
    }

    /// A scenario is a single-condition study.
    pub fn into_study(self) -> Study {
        let mut sim = self.sim;
        if self.jam_schedule.is_some() {
            sim.jam = self.jam_schedule;
        }
        Study {
            name: self.name.clone(),
            conditions: vec![Condition { label: self.name, sim }],
            policies: self.policies,
            agent: self.agent,
            reward: self.reward,
            epochs: self.epochs,
            eval_episodes: self.eval_episodes,
            replications: self.replications,
            seed: self.seed,
            powers_dbm: self.powers_dbm,
            exp3_eta: self.exp3_eta,
            exp3_eta_mix: self.exp3_eta_mix,
            train_condition: None,
        }
    }
}

/// One cell configuration within a study, e.g. one velocity or one
/// device count.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub sim: SimConfig,
}

impl Condition {
    /// Mean device velocity, the value reported in the CSV.
    pub fn velocity_kmh(&self) -> f64 {
        match self.sim.mobility {
            MobilityModel::Static => 0.0,
            MobilityModel::GaussMarkov { mean_velocity_kmh, .. } => mean_velocity_kmh,
        }
    }
}

/// A fully resolved workload: conditions x policies x replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub name: String,
    pub conditions: Vec<Condition>,
    pub policies: Vec<PolicyChoice>,
    pub agent: AgentConfig,
    pub reward: RewardWeights,
    pub epochs: u64,
    pub eval_episodes: u32,
    pub replications: u32,
    pub seed: u64,
    pub powers_dbm: Vec<i8>,
    pub exp3_eta: f64,
    pub exp3_eta_mix: f64,
    /// When set, learned policies train once on this condition (by
    /// label) and are then evaluated under every condition; when unset
    /// each condition trains its own policy.
    pub train_condition: Option<String>,
}

impl Study {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.conditions.is_empty() || self.policies.is_empty() {
            return Err(HarnessError::InvalidStudy(
                "a study needs at least one condition and one policy".into(),
            ));
        }
        if self.replications == 0 {
            return Err(HarnessError::InvalidStudy("replications must be at least 1".into()));
        }
        for c in &self.conditions {
            c.sim
                .validate()
                .map_err(|e| HarnessError::InvalidStudy(format!("condition `{}`: {e}", c.label)))?;
        }
        self.agent.validate().map_err(|e| HarnessError::InvalidStudy(e.to_string()))?;
        if let Some(label) = &self.train_condition {
            let Some(tc) = self.conditions.iter().find(|c| &c.label == label) else {
                return Err(HarnessError::InvalidStudy(format!(
                    "train_condition `{label}` does not name any condition"
                )));
            };
            if self.conditions.iter().any(|c| c.sim.channels != tc.sim.channels) {
                return Err(HarnessError::InvalidStudy(
                    "shared training requires every condition to use the same channel count".into(),
                ));
            }
        }
        Ok(())
    }

    /// The condition learned policies train on, when training is shared.
    pub fn training_condition(&self) -> Option<&Condition> {
        let label = self.train_condition.as_deref()?;
        self.conditions.iter().find(|c| c.label == label)
    }

    /// Restricts the run to a single policy (the `--policy` flag).
    pub fn retain_policy(&mut self, choice: PolicyChoice) {
        self.policies.retain(|&p| p == choice);
        if self.policies.is_empty() {
            self.policies.push(choice);
        }
    }
}
