//! Resource-allocation policies behind one uniform interface.
//!
//! The simulator asks a policy for transmission parameters whenever a
//! device joins (and optionally again later, per the policy's refresh
//! cadence), and feeds outcomes back so learning policies can improve.
//! Four policies are provided:
//!
//! - [`DrlPolicy`] — the centralized deep-Q allocator ([`crate::agent`]).
//! - [`RuleBasedPolicy`] — distance tiers: the smallest spreading factor
//!   whose link budget reaches the device, on a uniformly random channel.
//! - [`Exp3Policy`] — a decentralized adversarial bandit per device,
//!   pulling one arm per transmission.
//! - [`RandomPolicy`] — uniform over the action space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::agent::{AgentError, AgentState, DqnAgent, Experience, RewardWeights};
use crate::phy::{PhyConfig, PhyError, TransmissionParams, SPREADING_FACTORS};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("action index {index} out of range (space holds {len})")]
    ActionOutOfRange { index: usize, len: usize },
    #[error("device at {distance_m:.0} m is out of range even at the slowest rate")]
    OutOfRange { distance_m: f64 },
    #[error("mask permits no action")]
    EmptyMask,
    #[error("mask has {got} entries, action space has {expected}")]
    MaskLengthMismatch { expected: usize, got: usize },
    #[error("feedback for a step with no pending assignment")]
    NoPendingAssignment,
    #[error("invalid action space: {0}")]
    InvalidSpace(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

/// The discrete set of assignable `(channel, spreading factor, power)`
/// combinations, with a stable bijection to flat action indices:
/// channel-major, then spreading factor, then power.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    channels: usize,
    sfs: Vec<u8>,
    powers: Vec<i8>,
    bandwidth_hz: u32,
    coding_rate: u8,
}

impl ActionSpace {
    pub fn new(
        channels: usize,
        sfs: Vec<u8>,
        powers: Vec<i8>,
        bandwidth_hz: u32,
        coding_rate: u8,
    ) -> Result<Self, PolicyError> {
        if channels == 0 || sfs.is_empty() || powers.is_empty() {
            return Err(PolicyError::InvalidSpace("every axis needs at least one value".into()));
        }
        if !sfs.windows(2).all(|w| w[0] < w[1]) || !powers.windows(2).all(|w| w[0] < w[1]) {
            return Err(PolicyError::InvalidSpace(
                "spreading factors and powers must be strictly ascending".into(),
            ));
        }
        // Validate each combination through the PHY constructor once.
        for &sf in &sfs {
            for &p in &powers {
                TransmissionParams::new(sf, bandwidth_hz, coding_rate, p, 0)?;
            }
        }
        Ok(Self { channels, sfs, powers, bandwidth_hz, coding_rate })
    }

    /// All six spreading factors on `channels` channels at a single
    /// 14 dBm power level — the shape used throughout the experiments.
    pub fn default_for(channels: usize) -> Self {
        Self::new(channels, SPREADING_FACTORS.to_vec(), vec![14], 125_000, 5)
            .expect("default space is valid")
    }

    pub fn len(&self) -> usize {
        self.channels * self.sfs.len() * self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sfs(&self) -> &[u8] {
        &self.sfs
    }

    pub fn powers(&self) -> &[i8] {
        &self.powers
    }

    pub fn min_power(&self) -> i8 {
        self.powers[0]
    }

    pub fn max_power(&self) -> i8 {
        *self.powers.last().unwrap()
    }

    /// Flat index of `(channel, sf index, power index)`.
    pub fn encode(&self, channel: usize, sf_idx: usize, pow_idx: usize) -> usize {
        debug_assert!(
            channel < self.channels && sf_idx < self.sfs.len() && pow_idx < self.powers.len()
        );
        (channel * self.sfs.len() + sf_idx) * self.powers.len() + pow_idx
    }

    /// Inverse of [`Self::encode`]: `(channel, sf, power_dbm)`.
    pub fn decode(&self, action: usize) -> Result<(usize, u8, i8), PolicyError> {
        if action >= self.len() {
            return Err(PolicyError::ActionOutOfRange { index: action, len: self.len() });
        }
        let pow_idx = action % self.powers.len();
        let rest = action / self.powers.len();
        let sf_idx = rest % self.sfs.len();
        let channel = rest / self.sfs.len();
        Ok((channel, self.sfs[sf_idx], self.powers[pow_idx]))
    }

    /// Full transmission parameters for a flat action index.
    pub fn params(&self, action: usize) -> Result<TransmissionParams, PolicyError> {
        let (channel, sf, power) = self.decode(action)?;
        Ok(TransmissionParams::new(sf, self.bandwidth_hz, self.coding_rate, power, channel)?)
    }

    fn check_mask(&self, mask: Option<&[bool]>) -> Result<(), PolicyError> {
        if let Some(m) = mask {
            if m.len() != self.len() {
                return Err(PolicyError::MaskLengthMismatch { expected: self.len(), got: m.len() });
            }
            if !m.iter().any(|&x| x) {
                return Err(PolicyError::EmptyMask);
            }
        }
        Ok(())
    }

    fn allowed(&self, mask: Option<&[bool]>, action: usize) -> bool {
        mask.is_none_or(|m| m[action])
    }
}

/// What a policy is told about a device when asked for parameters.
#[derive(Debug, Clone, Copy)]
pub struct DeviceObservation {
    pub ed_id: usize,
    /// Gateway-side distance estimate (path loss inverted from the join
    /// transmission's received power).
    pub distance_m: f64,
    pub radius_m: f64,
}

/// End-of-step outcome for the device assigned at the start of this step.
#[derive(Debug, Clone, Copy)]
pub struct StepFeedback {
    pub ed_id: usize,
    /// The device's delivery ratio over its measurement window.
    pub pdr: f64,
    /// Airtime of one frame under the assigned parameters, seconds.
    pub airtime_s: f64,
    pub power_dbm: i8,
    /// Distance estimate of the next device to join (the successor state
    /// for learning policies).
    pub next_distance_m: f64,
    /// Whether this was the last step of the episode.
    pub terminal: bool,
}

/// When the simulator should re-query a policy for a device it has
/// already assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefreshCadence {
    /// Parameters are fixed at join time.
    Never,
    /// Re-query when the device has drifted from where it was assigned.
    OnDrift,
    /// Re-query before every transmission.
    EveryTx,
}

/// Uniform interface the simulator drives. One policy instance serves
/// one simulation; all calls arrive sequentially.
pub trait AllocationPolicy {
    fn name(&self) -> &'static str;

    fn refresh_cadence(&self) -> RefreshCadence;

    /// Resets per-episode state (a fresh, empty cell).
    fn begin_episode(&mut self) {}

    /// Picks parameters for a newly joined device.
    fn assign(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Result<TransmissionParams, PolicyError>;

    /// Re-picks parameters for an already-assigned device, per the
    /// refresh cadence. `None` keeps the current assignment.
    fn refresh(
        &mut self,
        _obs: &DeviceObservation,
        _mask: Option<&[bool]>,
    ) -> Option<TransmissionParams> {
        None
    }

    /// Delivery outcome of one transmission (bandit-style policies learn
    /// from this; others ignore it).
    fn transmission_feedback(&mut self, _ed_id: usize, _delivered: bool) {}

    /// End-of-step outcome for the most recent assignment.
    fn step_feedback(&mut self, _fb: &StepFeedback) -> Result<(), PolicyError> {
        Ok(())
    }

    /// Switches between learning and frozen-evaluation behaviour.
    /// Policies that always learn online ignore this.
    fn set_eval(&mut self, _eval: bool) {}

    /// Parameters a device falls back to when an assignment never reaches
    /// it: the slowest rate at the policy's highest power, on the channel
    /// it would have been assigned.
    fn fallback_params(&self, assigned: &TransmissionParams) -> TransmissionParams {
        TransmissionParams { sf: 12, ..*assigned }
    }
}

/// The deep-Q allocator exposed as a policy: encodes the observation,
/// selects epsilon-greedily (greedy in eval mode), and learns from
/// end-of-step feedback.
pub struct DrlPolicy {
    agent: DqnAgent,
    space: ActionSpace,
    weights: RewardWeights,
    /// Arrival-assignment counts this episode (the state's fractions).
    counts: Vec<u64>,
    radius_m: f64,
    pending: Option<(AgentState, usize)>,
    eval: bool,
}

impl DrlPolicy {
    /// Builds the policy and its freshly initialised agent. The state
    /// dimension is the action count plus one distance input.
    pub fn new(
        space: ActionSpace,
        agent_cfg: crate::agent::AgentConfig,
        weights: RewardWeights,
        seed: u64,
    ) -> Result<Self, PolicyError> {
        let n = space.len();
        let agent = DqnAgent::new(n + 1, n, agent_cfg, seed)?;
        Ok(Self {
            agent,
            space,
            weights,
            counts: vec![0; n],
            radius_m: 1.0,
            pending: None,
            eval: false,
        })
    }

    pub fn agent(&self) -> &DqnAgent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut DqnAgent {
        &mut self.agent
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    fn observe_state(&self, distance_m: f64) -> AgentState {
        AgentState::encode(&self.counts, distance_m, self.radius_m)
    }
}

impl AllocationPolicy for DrlPolicy {
    fn name(&self) -> &'static str {
        "drl"
    }

    fn refresh_cadence(&self) -> RefreshCadence {
        RefreshCadence::OnDrift
    }

    fn begin_episode(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.pending = None;
    }

    fn assign(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Result<TransmissionParams, PolicyError> {
        self.radius_m = obs.radius_m;
        let state = self.observe_state(obs.distance_m);
        let action = if self.eval {
            self.agent.greedy_action(&state, mask)?
        } else {
            self.agent.select_action(&state, mask)?
        };
        let params = self.space.params(action)?;
        self.pending = Some((state, action));
        self.counts[action] += 1;
        Ok(params)
    }

    fn refresh(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Option<TransmissionParams> {
        // Same behavioural distribution as assignment (exploring while
        // training, greedy in eval), but refreshes are control decisions:
        // they don't enter the allocation counts or the replay memory.
        let state = self.observe_state(obs.distance_m);
        let action = if self.eval {
            self.agent.greedy_action(&state, mask).ok()?
        } else {
            self.agent.select_action(&state, mask).ok()?
        };
        self.space.params(action).ok()
    }

    fn step_feedback(&mut self, fb: &StepFeedback) -> Result<(), PolicyError> {
        let (state, action) = self.pending.take().ok_or(PolicyError::NoPendingAssignment)?;
        if self.eval {
            return Ok(());
        }
        let reward = self.weights.reward(
            fb.pdr,
            fb.airtime_s,
            fb.power_dbm,
            self.space.min_power(),
            self.space.max_power(),
        );
        let next_state = self.observe_state(fb.next_distance_m);
        self.agent.observe(Experience {
            state,
            action,
            reward,
            next_state,
            terminal: fb.terminal,
        })?;
        Ok(())
    }

    fn set_eval(&mut self, eval: bool) {
        self.eval = eval;
    }

    fn fallback_params(&self, assigned: &TransmissionParams) -> TransmissionParams {
        TransmissionParams { sf: 12, power_dbm: self.space.max_power(), ..*assigned }
    }
}

/// Distance-tier baseline: the smallest spreading factor (then lowest
/// power) whose maximum range covers the device, on a uniformly random
/// allowed channel. Re-derived before every transmission, so it tracks
/// mobility for free.
pub struct RuleBasedPolicy {
    space: ActionSpace,
    phy: PhyConfig,
    rng: ChaCha12Rng,
}

impl RuleBasedPolicy {
    pub fn new(space: ActionSpace, phy: PhyConfig, seed: u64) -> Self {
        Self { space, phy, rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    fn pick(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Result<TransmissionParams, PolicyError> {
        self.space.check_mask(mask)?;
        for sf_idx in 0..self.space.sfs.len() {
            for pow_idx in 0..self.space.powers.len() {
                let sf = self.space.sfs[sf_idx];
                let power = self.space.powers[pow_idx];
                if self.phy.max_range_m(sf, power) < obs.distance_m {
                    continue;
                }
                let channels: Vec<usize> = (0..self.space.channels)
                    .filter(|&ch| self.space.allowed(mask, self.space.encode(ch, sf_idx, pow_idx)))
                    .collect();
                if channels.is_empty() {
                    continue;
                }
                let ch = channels[self.rng.random_range(0..channels.len())];
                return self.space.params(self.space.encode(ch, sf_idx, pow_idx));
            }
        }
        Err(PolicyError::OutOfRange { distance_m: obs.distance_m })
    }
}

impl AllocationPolicy for RuleBasedPolicy {
    fn name(&self) -> &'static str {
        "rule"
    }

    fn refresh_cadence(&self) -> RefreshCadence {
        RefreshCadence::EveryTx
    }

    fn assign(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Result<TransmissionParams, PolicyError> {
        self.pick(obs, mask)
    }

    fn refresh(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Option<TransmissionParams> {
        self.pick(obs, mask).ok()
    }
}

/// Exponential-weight bandit state for one device: positive weights over
/// the action space, selection probabilities mixed with a uniform floor.
#[derive(Debug, Clone)]
pub struct Exp3State {
    weights: Vec<f64>,
}

impl Exp3State {
    pub fn new(arms: usize) -> Self {
        Self { weights: vec![1.0; arms] }
    }

    /// Selection probabilities over allowed arms:
    /// `(1 - eta_mix) * w_i / sum(w) + eta_mix / K`, with the sum and `K`
    /// taken over the allowed arms. Disallowed arms get probability 0.
    pub fn probabilities(&self, eta_mix: f64, mask: Option<&[bool]>) -> Vec<f64> {
        let allowed = |i: usize| mask.is_none_or(|m| m[i]);
        let k = (0..self.weights.len()).filter(|&i| allowed(i)).count();
        let total: f64 =
            (0..self.weights.len()).filter(|&i| allowed(i)).map(|i| self.weights[i]).sum();
        self.weights
            .iter()
            .enumerate()
            .map(
                |(i, &w)| {
                    if allowed(i) {
                        (1.0 - eta_mix) * w / total + eta_mix / k as f64
                    } else {
                        0.0
                    }
                },
            )
            .collect()
    }

    /// Samples an arm from the current probabilities; returns the arm and
    /// the probability it was drawn with.
    pub fn select<R: Rng + ?Sized>(
        &self,
        eta_mix: f64,
        mask: Option<&[bool]>,
        rng: &mut R,
    ) -> (usize, f64) {
        let probs = self.probabilities(eta_mix, mask);
        let mut u = rng.random::<f64>();
        for (i, &p) in probs.iter().enumerate() {
            if u < p {
                return (i, p);
            }
            u -= p;
        }
        // Floating-point remainder: fall back to the last allowed arm.
        let last = (0..probs.len()).rev().find(|&i| probs[i] > 0.0).expect("non-empty mask");
        (last, probs[last])
    }

    /// Importance-weighted exponential update:
    /// `w_a *= exp(eta * (reward / p_a) / K)` with `K` the arm count.
    /// Weights are renormalised to keep the largest at 1, which leaves
    /// the selection probabilities unchanged.
    pub fn update(&mut self, arm: usize, prob: f64, reward: f64, eta: f64) {
        let k = self.weights.len() as f64;
        self.weights[arm] *= (eta * (reward / prob) / k).exp();
        let max = self.weights.iter().cloned().fold(f64::MIN, f64::max);
        if max > 1e100 {
            self.weights.iter_mut().for_each(|w| *w /= max);
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Decentralized per-device bandit baseline. Every device runs its own
/// exponential-weight learner over the full action space, pulling one arm
/// per transmission and updating from that transmission's delivery
/// outcome. State is discarded when an episode ends, so each cell
/// population learns from scratch — convergence is visibly slower than
/// the centralized allocator's, and mobility keeps invalidating what a
/// device has learned.
pub struct Exp3Policy {
    space: ActionSpace,
    eta: f64,
    eta_mix: f64,
    per_ed: BTreeMap<usize, Exp3State>,
    /// Last `(arm, probability)` pulled per device, awaiting its outcome.
    last_pull: BTreeMap<usize, (usize, f64)>,
    rng: ChaCha12Rng,
}

impl Exp3Policy {
    pub fn new(space: ActionSpace, eta: f64, eta_mix: f64, seed: u64) -> Self {
        Self {
            space,
            eta,
            eta_mix,
            per_ed: BTreeMap::new(),
            last_pull: BTreeMap::new(),
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    fn pull(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Result<TransmissionParams, PolicyError> {
        self.space.check_mask(mask)?;
        let state =
            self.per_ed.entry(obs.ed_id).or_insert_with(|| Exp3State::new(self.space.len()));
        let (arm, prob) = state.select(self.eta_mix, mask, &mut self.rng);
        self.last_pull.insert(obs.ed_id, (arm, prob));
        self.space.params(arm)
    }
}

impl AllocationPolicy for Exp3Policy {
    fn name(&self) -> &'static str {
        "exp3"
    }

    fn refresh_cadence(&self) -> RefreshCadence {
        RefreshCadence::EveryTx
    }

    fn begin_episode(&mut self) {
        self.per_ed.clear();
        self.last_pull.clear();
    }

    fn assign(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Result<TransmissionParams, PolicyError> {
        self.pull(obs, mask)
    }

    fn refresh(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Option<TransmissionParams> {
        self.pull(obs, mask).ok()
    }

    fn transmission_feedback(&mut self, ed_id: usize, delivered: bool) {
        if let (Some(&(arm, prob)), Some(state)) =
            (self.last_pull.get(&ed_id), self.per_ed.get_mut(&ed_id))
        {
            state.update(arm, prob, f64::from(u8::from(delivered)), self.eta);
        }
    }
}

/// Uniform-random assignment over the allowed actions; never learns.
pub struct RandomPolicy {
    space: ActionSpace,
    rng: ChaCha12Rng,
}

impl RandomPolicy {
    pub fn new(space: ActionSpace, seed: u64) -> Self {
        Self { space, rng: ChaCha12Rng::seed_from_u64(seed) }
    }
}

impl AllocationPolicy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn refresh_cadence(&self) -> RefreshCadence {
        RefreshCadence::Never
    }

    fn assign(
        &mut self,
        obs: &DeviceObservation,
        mask: Option<&[bool]>,
    ) -> Result<TransmissionParams, PolicyError> {
        let _ = obs;
        self.space.check_mask(mask)?;
        let allowed: Vec<usize> =
            (0..self.space.len()).filter(|&a| self.space.allowed(mask, a)).collect();
        let action = allowed[self.rng.random_range(0..allowed.len())];
        self.space.params(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(ed_id: usize, distance_m: f64) -> DeviceObservation {
        DeviceObservation { ed_id, distance_m, radius_m: 4500.0 }
    }

    #[test]
    fn action_index_bijection_round_trips() {
        for space in [
            ActionSpace::default_for(8),
            ActionSpace::new(2, vec![7, 9, 12], vec![2, 14, 20], 125_000, 5).unwrap(),
            ActionSpace::new(1, vec![7], vec![14], 125_000, 5).unwrap(),
        ] {
            for action in 0..space.len() {
                let (ch, sf, pow) = space.decode(action).unwrap();
                let sf_idx = space.sfs().iter().position(|&s| s == sf).unwrap();
                let pow_idx = space.powers().iter().position(|&p| p == pow).unwrap();
                assert_eq!(space.encode(ch, sf_idx, pow_idx), action);
            }
            assert!(space.decode(space.len()).is_err());
        }
    }

    #[test]
    fn action_ordering_is_channel_major() {
        let space = ActionSpace::default_for(8);
        assert_eq!(space.len(), 48);
        assert_eq!(space.decode(0).unwrap(), (0, 7, 14));
        assert_eq!(space.decode(47).unwrap(), (7, 12, 14));
        // Within one channel the six spreading factors are consecutive.
        assert_eq!(space.decode(6).unwrap(), (1, 7, 14));
    }

    #[test]
    fn action_space_rejects_degenerate_axes() {
        assert!(ActionSpace::new(0, vec![7], vec![14], 125_000, 5).is_err());
        assert!(ActionSpace::new(1, vec![], vec![14], 125_000, 5).is_err());
        assert!(ActionSpace::new(1, vec![9, 7], vec![14], 125_000, 5).is_err());
        assert!(ActionSpace::new(1, vec![7], vec![25], 125_000, 5).is_err(), "power beyond range");
    }

    #[test]
    fn rule_based_picks_the_smallest_reaching_sf() {
        let space = ActionSpace::default_for(2);
        let mut policy = RuleBasedPolicy::new(space, PhyConfig::default(), 3);
        assert_eq!(policy.assign(&obs(0, 500.0), None).unwrap().sf, 7);
        assert_eq!(policy.assign(&obs(0, 4400.0), None).unwrap().sf, 12);
        assert!(matches!(
            policy.assign(&obs(0, 5000.0), None),
            Err(PolicyError::OutOfRange { .. })
        ));
    }

    #[test]
    fn rule_based_sf_is_nondecreasing_in_distance() {
        let space = ActionSpace::default_for(1);
        let mut policy = RuleBasedPolicy::new(space, PhyConfig::default(), 4);
        let mut last_sf = 0;
        for d in (50..=4500).step_by(50) {
            let sf = policy.assign(&obs(0, d as f64), None).unwrap().sf;
            assert!(sf >= last_sf, "sf regressed from {last_sf} to {sf} at {d} m");
            last_sf = sf;
        }
    }

    #[test]
    fn rule_based_channel_choice_is_uniform() {
        let space = ActionSpace::default_for(4);
        let mut policy = RuleBasedPolicy::new(space, PhyConfig::default(), 5);
        let mut counts = [0f64; 4];
        let n = 4000;
        for _ in 0..n {
            counts[policy.assign(&obs(0, 500.0), None).unwrap().channel] += 1.0;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 3 degrees of freedom; 16.27 is the 99.9th percentile.
        assert!(chi2 < 16.27, "chi-squared {chi2}, counts {counts:?}");
    }

    #[test]
    fn rule_based_respects_masks() {
        let space = ActionSpace::default_for(2);
        let mut policy = RuleBasedPolicy::new(space.clone(), PhyConfig::default(), 6);
        // Forbid SF7 everywhere: a close-in device lands on SF8.
        let mask: Vec<bool> = (0..space.len()).map(|a| space.decode(a).unwrap().1 != 7).collect();
        assert_eq!(policy.assign(&obs(0, 500.0), Some(&mask)).unwrap().sf, 8);
        // Allow only channel 1.
        let mask: Vec<bool> = (0..space.len()).map(|a| space.decode(a).unwrap().0 == 1).collect();
        for _ in 0..20 {
            assert_eq!(policy.assign(&obs(0, 500.0), Some(&mask)).unwrap().channel, 1);
        }
        assert!(matches!(
            policy.assign(&obs(0, 500.0), Some(&vec![false; space.len()])),
            Err(PolicyError::EmptyMask)
        ));
    }

    #[test]
    fn exp3_fresh_state_is_uniform() {
        let state = Exp3State::new(4);
        let probs = state.probabilities(0.2, None);
        for &p in &probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp3_update_matches_hand_arithmetic() {
        // Two arms, eta 0.1, arm 0 pulled with probability 0.5, reward 1:
        // the weight multiplies by exp(0.1 * (1/0.5) / 2) = exp(0.1).
        let mut state = Exp3State::new(2);
        state.update(0, 0.5, 1.0, 0.1);
        assert!((state.weights()[0] - 0.1f64.exp()).abs() < 1e-12);
        assert_eq!(state.weights()[1], 1.0);

        // Zero reward leaves weights untouched.
        let mut state = Exp3State::new(2);
        state.update(0, 0.5, 0.0, 0.1);
        assert_eq!(state.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn exp3_probabilities_sum_to_one_with_a_floor() {
        let mut state = Exp3State::new(5);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (arm, prob) = state.select(0.1, None, &mut rng);
            state.update(arm, prob, rng.random::<f64>(), 0.3);
        }
        let probs = state.probabilities(0.1, None);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for &p in &probs {
            assert!(p >= 0.1 / 5.0 - 1e-12, "probability {p} under the floor");
        }
    }

    #[test]
    fn exp3_masked_arms_get_zero_probability() {
        let state = Exp3State::new(4);
        let probs = state.probabilities(0.2, Some(&[true, false, true, false]));
        assert_eq!(probs[1], 0.0);
        assert_eq!(probs[3], 0.0);
        assert!((probs[0] - 0.5).abs() < 1e-12);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp3_concentrates_on_the_rewarding_arm() {
        let space = ActionSpace::new(1, vec![7, 8], vec![14], 125_000, 5).unwrap();
        let mut policy = Exp3Policy::new(space, 0.1, 0.1, 11);
        for _ in 0..2000 {
            let params = policy.assign(&obs(42, 100.0), None).unwrap();
            policy.transmission_feedback(42, params.sf == 8);
        }
        let probs = policy.per_ed[&42].probabilities(0.1, None);
        assert!(probs[1] > 0.9, "arm probabilities {probs:?}");
    }

    #[test]
    fn exp3_forgets_between_episodes() {
        let space = ActionSpace::new(1, vec![7, 8], vec![14], 125_000, 5).unwrap();
        let mut policy = Exp3Policy::new(space, 0.1, 0.1, 12);
        for _ in 0..500 {
            let params = policy.assign(&obs(7, 100.0), None).unwrap();
            policy.transmission_feedback(7, params.sf == 8);
        }
        assert!(policy.per_ed[&7].weights()[1] > policy.per_ed[&7].weights()[0]);
        policy.begin_episode();
        assert!(policy.per_ed.is_empty());
    }

    #[test]
    fn random_policy_is_uniform_over_the_space() {
        let space = ActionSpace::default_for(8);
        let mut policy = RandomPolicy::new(space.clone(), 13);
        let n = 10_000;
        let mut counts = vec![0f64; space.len()];
        for _ in 0..n {
            let params = policy.assign(&obs(0, 1000.0), None).unwrap();
            let sf_idx = usize::from(params.sf - 7);
            counts[space.encode(params.channel, sf_idx, 0)] += 1.0;
        }
        let expected = n as f64 / 48.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 47 degrees of freedom; 82.7 is the 99.9th percentile.
        assert!(chi2 < 82.7, "chi-squared {chi2}");
    }

    #[test]
    fn drl_policy_learns_from_step_feedback() {
        let space = ActionSpace::default_for(1);
        let cfg = crate::agent::AgentConfig {
            hidden_layers: vec![8],
            warmup: 4,
            batch_size: 4,
            replay_capacity: 64,
            ..Default::default()
        };
        let mut policy = DrlPolicy::new(space, cfg, RewardWeights::default(), 14).unwrap();
        policy.begin_episode();
        for step in 0..6 {
            let params = policy.assign(&obs(step, 600.0), None).unwrap();
            policy
                .step_feedback(&StepFeedback {
                    ed_id: step,
                    pdr: 1.0,
                    airtime_s: 0.1,
                    power_dbm: params.power_dbm,
                    next_distance_m: 700.0,
                    terminal: step == 5,
                })
                .unwrap();
        }
        assert_eq!(policy.agent().steps(), 6);
        assert!(policy.agent().last_loss().is_some(), "agent never trained");
        // Feedback with nothing pending is a sequencing error.
        assert!(matches!(
            policy.step_feedback(&StepFeedback {
                ed_id: 0,
                pdr: 1.0,
                airtime_s: 0.1,
                power_dbm: 14,
                next_distance_m: 0.0,
                terminal: false,
            }),
            Err(PolicyError::NoPendingAssignment)
        ));
    }

    #[test]
    fn drl_policy_in_eval_mode_is_deterministic_and_frozen() {
        let space = ActionSpace::default_for(2);
        let mut policy =
            DrlPolicy::new(space, Default::default(), RewardWeights::default(), 15).unwrap();
        policy.set_eval(true);
        policy.begin_episode();
        let first = policy.assign(&obs(0, 1200.0), None).unwrap();
        policy
            .step_feedback(&StepFeedback {
                ed_id: 0,
                pdr: 1.0,
                airtime_s: 0.1,
                power_dbm: 14,
                next_distance_m: 1200.0,
                terminal: false,
            })
            .unwrap();
        assert_eq!(policy.agent().steps(), 0, "eval feedback must not reach the agent");
        // Same observation after an episode reset: identical assignment.
        policy.begin_episode();
        let second = policy.assign(&obs(0, 1200.0), None).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn drl_fallback_is_slowest_rate_at_max_power() {
        let space = ActionSpace::new(2, vec![7, 8, 9], vec![2, 14], 125_000, 5).unwrap();
        let policy =
            DrlPolicy::new(space, Default::default(), RewardWeights::default(), 16).unwrap();
        let assigned = TransmissionParams::new(7, 125_000, 5, 2, 1).unwrap();
        let fb = policy.fallback_params(&assigned);
        assert_eq!(fb.sf, 12);
        assert_eq!(fb.power_dbm, 14);
        assert_eq!(fb.channel, 1, "fallback keeps the assigned channel");
    }
}
