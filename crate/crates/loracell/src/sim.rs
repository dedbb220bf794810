//! Discrete-event simulation of the cell.
//!
//! An episode starts with an empty cell and adds one device per step.
//! Each step: the policy assigns transmission parameters to the new
//! device, the cell runs for a fixed traffic window (device transmissions
//! are Poisson; collisions resolve by the pairwise signal-ratio rule as
//! they happen), and the new device's measured delivery ratio is fed back
//! to the policy together with the next arrival's distance.
//!
//! The simulated clock is global and persists across episodes; delivery
//! metrics are additionally bucketed into fixed-length epochs of that
//! global time, which is what learning curves are plotted against.
//!
//! Determinism: all randomness flows from the config seed through
//! independent per-device streams (placement, traffic, mobility, noise),
//! so runs with equal configs are bit-identical regardless of platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp, StandardNormal};
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use thiserror::Error;

use crate::medium::{Medium, MediumError, SirMatrix, Transmission};
use crate::phy::{PhyConfig, PhyError, TransmissionParams};
use crate::policy::{
    AllocationPolicy, DeviceObservation, PolicyError, RefreshCadence, StepFeedback,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid sim config: {0}")]
    InvalidConfig(String),
    #[error("policy assigned channel {channel} but the cell has {channels}")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error("no transmissions were completed")]
    NoData,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Medium(#[from] MediumError),
}

/// Channel-access discipline used before each transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacProtocol {
    /// Transmit the moment a frame is ready.
    Aloha,
    /// Add a fixed per-device phase offset,
    /// `((ed_id * u_d_us) / 10^6) mod mean_interarrival`, to every
    /// transmission.
    DelayBeforeTransmit,
    /// Listen before talk: back off a fixed interval while any co-channel
    /// transmission is received above the sensing threshold.
    Csma,
}

/// How devices move.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum MobilityModel {
    Static,
    /// First-order autoregressive velocity and heading: each step,
    /// `v' = alpha*v + (1-alpha)*mean + sqrt(1-alpha^2)*sigma*w`.
    GaussMarkov {
        mean_velocity_kmh: f64,
        velocity_sigma_kmh: f64,
        #[serde(default = "default_heading_sigma")]
        heading_sigma_rad: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_mobility_step")]
        step_s: f64,
    },
}

fn default_heading_sigma() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    0.75
}

fn default_mobility_step() -> f64 {
    60.0
}

/// Which co-channel rejection matrix the medium uses.
// `Custom` inlines its 288-byte matrix: the choice is built once per
// simulation, so boxing would only complicate the config surface.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SirMatrixChoice {
    /// One threshold on the diagonal, one everywhere else.
    Uniform { co_sf_db: f64, inter_sf_db: f64 },
    /// The bundled measurement-derived matrix.
    Measured,
    /// Fully explicit 6x6 threshold matrix, rows = desired SF7..SF12.
    Custom { rows: [[f64; 6]; 6] },
}

impl Default for SirMatrixChoice {
    fn default() -> Self {
        Self::Uniform { co_sf_db: 6.0, inter_sf_db: -8.0 }
    }
}

impl SirMatrixChoice {
    pub fn build(&self) -> Result<SirMatrix, SimError> {
        let m = match self {
            Self::Uniform { co_sf_db, inter_sf_db } => SirMatrix::uniform(*co_sf_db, *inter_sf_db),
            Self::Measured => SirMatrix::measured(),
            Self::Custom { rows } => SirMatrix(*rows),
        };
        m.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        Ok(m)
    }
}

/// Deterministic denial of one channel from a given epoch onwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamConfig {
    pub at_epoch: u64,
    pub channel: usize,
}

/// Full simulation setup. Unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Devices per episode (also the episode length in steps).
    pub n_eds: usize,
    pub radius_m: f64,
    pub channels: usize,
    /// Mean of the exponential per-device transmission gap.
    pub mean_interarrival_s: f64,
    pub payload_bytes: u32,
    /// Simulated seconds per episode step; defaults to five mean
    /// inter-arrivals so the new device gets a usable delivery sample.
    pub step_window_s: Option<f64>,
    /// Metric-bucket length in simulated seconds; defaults to fifty mean
    /// inter-arrivals.
    pub epoch_s: Option<f64>,
    pub mac: MacProtocol,
    /// Per-device delay quantum of the delay-before-transmit MAC, in
    /// microseconds.
    pub u_d_us: f64,
    pub csma_sense_dbm: f64,
    pub csma_backoff_s: f64,
    /// Sensing attempts before a frame is sent regardless.
    pub csma_max_tries: u32,
    pub mobility: MobilityModel,
    /// Delivery outcomes kept per device for its rolling PDR estimate.
    pub pdr_window: usize,
    /// Probability that a parameter assignment never reaches the device,
    /// which then falls back to the policy's fallback parameters.
    pub assign_loss_prob: f64,
    /// Fraction of the radius a device must drift before an
    /// on-drift policy is re-queried.
    pub drift_refresh_fraction: f64,
    pub seed: u64,
    pub phy: PhyConfig,
    pub sir: SirMatrixChoice,
    pub jam: Option<JamConfig>,
    /// Record every transmission and its outcome (for tests/analyses).
    pub record_transcript: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_eds: 100,
            radius_m: 4500.0,
            channels: 1,
            mean_interarrival_s: 240.0,
            payload_bytes: 50,
            step_window_s: None,
            epoch_s: None,
            mac: MacProtocol::Aloha,
            u_d_us: 1000.0,
            csma_sense_dbm: -110.0,
            csma_backoff_s: 0.1,
            csma_max_tries: 100,
            mobility: MobilityModel::Static,
            pdr_window: 5,
            assign_loss_prob: 0.0,
            drift_refresh_fraction: 0.05,
            seed: 0,
            phy: PhyConfig::default(),
            sir: SirMatrixChoice::default(),
            jam: None,
            record_transcript: false,
        }
    }
}

impl SimConfig {
    pub fn effective_step_window_s(&self) -> f64 {
        self.step_window_s.unwrap_or(5.0 * self.mean_interarrival_s)
    }

    pub fn effective_epoch_s(&self) -> f64 {
        self.epoch_s.unwrap_or(50.0 * self.mean_interarrival_s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if self.n_eds == 0 {
            return bad("n_eds must be positive");
        }
        if self.radius_m <= 0.0 {
            return bad("radius_m must be positive");
        }
        if self.channels == 0 {
            return bad("channels must be positive");
        }
        if self.mean_interarrival_s <= 0.0 {
            return bad("mean_interarrival_s must be positive");
        }
        if !(1..=255).contains(&self.payload_bytes) {
            return bad("payload_bytes must be in 1..=255");
        }
        if self.effective_step_window_s() <= 0.0 || self.effective_epoch_s() <= 0.0 {
            return bad("step window and epoch length must be positive");
        }
        if self.u_d_us < 0.0 {
            return bad("u_d_us must be nonnegative");
        }
        if self.csma_backoff_s <= 0.0 || self.csma_max_tries == 0 {
            return bad("csma backoff must be positive and tries nonzero");
        }
        if self.pdr_window == 0 {
            return bad("pdr_window must be positive");
        }
        if !(0.0..=1.0).contains(&self.assign_loss_prob) {
            return bad("assign_loss_prob must lie in [0, 1]");
        }
        if self.drift_refresh_fraction < 0.0 {
            return bad("drift_refresh_fraction must be nonnegative");
        }
        if let MobilityModel::GaussMarkov {
            mean_velocity_kmh,
            velocity_sigma_kmh,
            heading_sigma_rad,
            alpha,
            step_s,
        } = self.mobility
        {
            if mean_velocity_kmh < 0.0
                || velocity_sigma_kmh < 0.0
                || heading_sigma_rad < 0.0
                || !(0.0..=1.0).contains(&alpha)
                || step_s <= 0.0
            {
                return bad("invalid mobility parameters");
            }
        }
        if let Some(jam) = self.jam {
            if jam.channel >= self.channels {
                return bad("jammed channel outside the frequency plan");
            }
        }
        self.phy.validate()?;
        self.sir.build()?;
        Ok(())
    }
}

/// One exponential transmission gap with the configured mean.
pub fn next_arrival<R: Rng + ?Sized>(mean_s: f64, rng: &mut R) -> f64 {
    rng.sample(Exp::new(1.0 / mean_s).expect("positive mean"))
}

/// Static per-device transmission delay of the MAC discipline:
/// zero for ALOHA and CSMA, `((ed_id * u_d_us) / 10^6) mod pkt_iat_s`
/// seconds for delay-before-transmit.
pub fn tx_delay(mac: MacProtocol, ed_id: usize, u_d_us: f64, pkt_iat_s: f64) -> f64 {
    match mac {
        MacProtocol::Aloha | MacProtocol::Csma => 0.0,
        MacProtocol::DelayBeforeTransmit => (ed_id as f64 * u_d_us / 1e6) % pkt_iat_s,
    }
}

/// Position and motion of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobileState {
    pub x_m: f64,
    pub y_m: f64,
    pub velocity_kmh: f64,
    pub heading_rad: f64,
    /// Per-device mean direction the heading regresses towards.
    pub mean_heading_rad: f64,
}

impl MobileState {
    pub fn distance_m(&self) -> f64 {
        self.x_m.hypot(self.y_m)
    }
}

/// Gauss-Markov parameters, extracted from [`MobilityModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMarkovParams {
    pub mean_velocity_kmh: f64,
    pub velocity_sigma_kmh: f64,
    pub heading_sigma_rad: f64,
    pub alpha: f64,
    pub step_s: f64,
}

impl MobilityModel {
    pub fn gauss_markov(&self) -> Option<GaussMarkovParams> {
        match *self {
            MobilityModel::Static => None,
            MobilityModel::GaussMarkov {
                mean_velocity_kmh,
                velocity_sigma_kmh,
                heading_sigma_rad,
                alpha,
                step_s,
            } => Some(GaussMarkovParams {
                mean_velocity_kmh,
                velocity_sigma_kmh,
                heading_sigma_rad,
                alpha,
                step_s,
            }),
        }
    }
}

/// Advances one mobility step given the two standard-normal draws.
/// Velocity is clamped nonnegative. A step that would exit the cell is
/// specularly reflected: the heading (and the mean heading) bounce off
/// the tangent at the exit point and the overshoot folds back inside.
/// Returns whether a reflection happened.
pub fn gauss_markov_step(
    state: &mut MobileState,
    gm: &GaussMarkovParams,
    radius_m: f64,
    w_v: f64,
    w_h: f64,
) -> bool {
    let a = gm.alpha;
    let noise = (1.0 - a * a).sqrt();
    state.velocity_kmh = (a * state.velocity_kmh
        + (1.0 - a) * gm.mean_velocity_kmh
        + noise * gm.velocity_sigma_kmh * w_v)
        .max(0.0);
    state.heading_rad = a * state.heading_rad
        + (1.0 - a) * state.mean_heading_rad
        + noise * gm.heading_sigma_rad * w_h;

    let dist = state.velocity_kmh / 3.6 * gm.step_s;
    state.x_m += dist * state.heading_rad.cos();
    state.y_m += dist * state.heading_rad.sin();

    let r = state.x_m.hypot(state.y_m);
    if r <= radius_m {
        return false;
    }
    let (nx, ny) = (state.x_m / r, state.y_m / r);
    let reflect = |angle: f64| {
        let (dx, dy) = (angle.cos(), angle.sin());
        let dot = dx * nx + dy * ny;
        (dy - 2.0 * dot * ny).atan2(dx - 2.0 * dot * nx)
    };
    state.heading_rad = reflect(state.heading_rad);
    state.mean_heading_rad = reflect(state.mean_heading_rad);
    let folded = (2.0 * radius_m - r).clamp(0.0, radius_m);
    state.x_m = nx * folded;
    state.y_m = ny * folded;
    true
}

/// One device in the cell.
#[derive(Debug)]
struct EndDevice {
    id: usize,
    mobile: MobileState,
    /// Where the device was when its current parameters were assigned
    /// (drives on-drift refresh).
    assigned_at: (f64, f64),
    last_mobility_update_s: f64,
    params: TransmissionParams,
    /// Gateway-side distance estimate from the last join/refresh.
    observed_distance_m: f64,
    window: VecDeque<bool>,
    tx_count: u64,
    delivered_count: u64,
    energy_j: f64,
    traffic_rng: ChaCha12Rng,
    mobility_rng: ChaCha12Rng,
    noise_rng: ChaCha12Rng,
}

impl EndDevice {
    /// Rolling delivery ratio over the last `pdr_window` outcomes; zero
    /// until the first transmission completes.
    fn pdr_estimate(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().filter(|&&d| d).count() as f64 / self.window.len() as f64
        }
    }

    fn record_outcome(&mut self, delivered: bool, cap: usize) {
        if self.window.len() == cap {
            self.window.pop_front();
        }
        self.window.push_back(delivered);
        self.tx_count += 1;
        if delivered {
            self.delivered_count += 1;
        }
    }

    /// Advances mobility in whole step increments up to `to_s`.
    fn advance_mobility(&mut self, model: &MobilityModel, radius_m: f64, to_s: f64) {
        let Some(gm) = model.gauss_markov() else {
            self.last_mobility_update_s = to_s;
            return;
        };
        while self.last_mobility_update_s + gm.step_s <= to_s {
            let w_v: f64 = self.mobility_rng.sample(StandardNormal);
            let w_h: f64 = self.mobility_rng.sample(StandardNormal);
            gauss_markov_step(&mut self.mobile, &gm, radius_m, w_v, w_h);
            self.last_mobility_update_s += gm.step_s;
        }
    }

    /// Distance as the gateway sees it: path loss inverted from a
    /// received power that includes the shadowing draw (exact when
    /// shadowing is disabled). Distances are floored at one metre.
    fn estimate_distance(&mut self, phy: &PhyConfig) -> f64 {
        let true_d = self.mobile.distance_m().max(1.0);
        if phy.shadowing_sigma_db == 0.0 {
            return true_d;
        }
        let noise: f64 = self.noise_rng.sample(StandardNormal);
        let rssi = phy.received_power(14, true_d).expect("positive distance")
            + noise * phy.shadowing_sigma_db;
        phy.distance_for_rssi(rssi, 14)
    }

    /// Gateway RSSI of one frame sent from the current position.
    fn gateway_rssi(&mut self, phy: &PhyConfig) -> f64 {
        let d = self.mobile.distance_m().max(1.0);
        let mut rssi = phy.received_power(self.params.power_dbm, d).expect("positive distance");
        if phy.shadowing_sigma_db > 0.0 {
            let noise: f64 = self.noise_rng.sample(StandardNormal);
            rssi += noise * phy.shadowing_sigma_db;
        }
        rssi
    }
}

/// splitmix64, used to derive independent per-device stream seeds.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn stream_seed(master: u64, device: u64, purpose: u64) -> u64 {
    splitmix64(master ^ splitmix64(device.wrapping_mul(0xA076_1D64_78BD_642F) ^ purpose))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    /// A device wants to transmit (subject to the MAC gate).
    Attempt { ed_id: usize, tries: u32 },
    /// An in-flight transmission finishes.
    End { channel: usize, uid: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time_s: f64,
    /// Ends sort before attempts at equal times, so back-to-back frames
    /// never see each other as active.
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn attempt(time_s: f64, seq: u64, ed_id: usize, tries: u32) -> Self {
        Self { time_s, rank: 1, seq, kind: EventKind::Attempt { ed_id, tries } }
    }

    fn end(time_s: f64, seq: u64, channel: usize, uid: u64) -> Self {
        Self { time_s, rank: 0, seq, kind: EventKind::End { channel, uid } }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time_s
            .total_cmp(&other.time_s)
            .then(self.rank.cmp(&other.rank))
            .then(self.seq.cmp(&other.seq))
    }
}

/// A transmission currently on the air.
#[derive(Debug, Clone, Copy)]
struct ActiveTx {
    uid: u64,
    ed_id: usize,
    params: TransmissionParams,
    rssi_dbm: f64,
    start_s: f64,
    end_s: f64,
    /// Transmitter position at start, for listen-before-talk sensing.
    origin: (f64, f64),
    /// Above the gateway's sensitivity floor at all.
    reachable: bool,
    /// Lost to interference (marked online as overlaps appear).
    doomed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Accum {
    sent: u64,
    delivered: u64,
    per_sf_sent: [u64; 6],
    per_sf_delivered: [u64; 6],
    energy_j: f64,
}

impl Accum {
    fn record(&mut self, sf: u8, delivered: bool, energy_j: f64) {
        let i = usize::from(sf - 7);
        self.sent += 1;
        self.per_sf_sent[i] += 1;
        if delivered {
            self.delivered += 1;
            self.per_sf_delivered[i] += 1;
        }
        self.energy_j += energy_j;
    }

    fn per_sf_alloc(&self) -> [f64; 6] {
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

/// Delivery metrics over one fixed-length bucket of global simulated time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub sent: u64,
    pub delivered: u64,
    pub pdr: f64,
    pub per_sf_sent: [u64; 6],
    pub per_sf_delivered: [u64; 6],
    pub per_sf_alloc: [f64; 6],
    pub per_sf_pdr: [f64; 6],
    /// Mean transmission energy in millijoules.
    pub energy_mj_mean: f64,
}

/// Delivery metrics over one full episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub sent: u64,
    pub delivered: u64,
    pub pdr: f64,
    pub per_sf_sent: [u64; 6],
    pub per_sf_alloc: [f64; 6],
    pub per_sf_pdr: [f64; 6],
    pub energy_mj_mean: f64,
}

fn epoch_metrics(epoch: u64, a: &Accum) -> EpochMetrics {
    EpochMetrics {
        epoch,
        sent: a.sent,
        delivered: a.delivered,
        pdr: a.delivered as f64 / a.sent as f64,
        per_sf_sent: a.per_sf_sent,
        per_sf_delivered: a.per_sf_delivered,
        per_sf_alloc: a.per_sf_alloc(),
        per_sf_pdr: a.per_sf_pdr(),
        energy_mj_mean: 1000.0 * a.energy_j / a.sent as f64,
    }
}

/// Summary counters for one device, for inspection and examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceStats {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub sf: u8,
    pub channel: usize,
    pub tx_count: u64,
    pub delivered_count: u64,
    pub energy_j: f64,
}

/// The single-cell simulator. One instance owns all mutable state and is
/// driven strictly sequentially.
pub struct Simulation {
    cfg: SimConfig,
    window_s: f64,
    epoch_len_s: f64,
    medium: Medium,
    eds: Vec<EndDevice>,
    active: Vec<Vec<ActiveTx>>,
    heap: BinaryHeap<Reverse<Event>>,
    clock_s: f64,
    horizon_s: f64,
    seq: u64,
    next_uid: u64,
    created_total: u64,
    placement_rng: ChaCha12Rng,
    control_rng: ChaCha12Rng,
    epoch_accums: BTreeMap<u64, Accum>,
    episode_accum: Accum,
    refresh_exempt: Option<usize>,
    transcript: Vec<(Transmission, bool)>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut medium = Medium::new(cfg.channels, cfg.sir.build()?);
        let epoch_len_s = cfg.effective_epoch_s();
        if let Some(jam) = cfg.jam {
            medium.jam(jam.channel, jam.at_epoch as f64 * epoch_len_s)?;
        }
        Ok(Self {
            window_s: cfg.effective_step_window_s(),
            epoch_len_s,
            medium,
            eds: Vec::new(),
            active: vec![Vec::new(); cfg.channels],
            heap: BinaryHeap::new(),
            clock_s: 0.0,
            horizon_s: 0.0,
            seq: 0,
            next_uid: 0,
            created_total: 0,
            placement_rng: ChaCha12Rng::seed_from_u64(stream_seed(cfg.seed, 0, 100)),
            control_rng: ChaCha12Rng::seed_from_u64(stream_seed(cfg.seed, 0, 101)),
            epoch_accums: BTreeMap::new(),
            episode_accum: Accum::default(),
            refresh_exempt: None,
            transcript: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn clock_s(&self) -> f64 {
        self.clock_s
    }

    /// Transmission log with outcomes, when `record_transcript` is set.
    pub fn transcript(&self) -> &[(Transmission, bool)] {
        &self.transcript
    }

    pub fn device_stats(&self) -> Vec<DeviceStats> {
        self.eds
            .iter()
            .map(|ed| DeviceStats {
                id: ed.id,
                x_m: ed.mobile.x_m,
                y_m: ed.mobile.y_m,
                sf: ed.params.sf,
                channel: ed.params.channel,
                tx_count: ed.tx_count,
                delivered_count: ed.delivered_count,
                energy_j: ed.energy_j,
            })
            .collect()
    }

    /// Epoch buckets that can no longer change (strictly before the
    /// bucket containing the current clock), in order.
    pub fn take_completed_epochs(&mut self) -> Vec<EpochMetrics> {
        let current = (self.clock_s / self.epoch_len_s).floor() as u64;
        let open = self.epoch_accums.split_off(&current);
        let done = std::mem::replace(&mut self.epoch_accums, open);
        done.iter().map(|(&e, a)| epoch_metrics(e, a)).collect()
    }

    /// Remaining (partial) epoch buckets; call once after the last episode.
    pub fn flush_epochs(&mut self) -> Vec<EpochMetrics> {
        let done = std::mem::take(&mut self.epoch_accums);
        done.iter().map(|(&e, a)| epoch_metrics(e, a)).collect()
    }

    fn push_event(&mut self, ev: Event) {
        self.heap.push(Reverse(ev));
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn check_channel(&self, params: &TransmissionParams) -> Result<(), SimError> {
        if params.channel >= self.cfg.channels {
            return Err(SimError::ChannelOutOfRange {
                channel: params.channel,
                channels: self.cfg.channels,
            });
        }
        Ok(())
    }

    /// Creates (but does not insert) the device that joins at `join_s`:
    /// uniform position over the disc, fresh randomness streams, initial
    /// velocity at the mobility mean, and the join-time distance estimate.
    fn create_ed(&mut self, id: usize, join_s: f64) -> EndDevice {
        let u: f64 = self.placement_rng.random();
        let theta = self.placement_rng.random::<f64>() * std::f64::consts::TAU;
        let r = self.cfg.radius_m * u.sqrt();
        let counter = self.created_total;
        self.created_total += 1;

        let mut mobility_rng = ChaCha12Rng::seed_from_u64(stream_seed(self.cfg.seed, counter, 2));
        let heading = mobility_rng.random::<f64>() * std::f64::consts::TAU;
        let velocity = self.cfg.mobility.gauss_markov().map_or(0.0, |gm| gm.mean_velocity_kmh);

        let mut ed = EndDevice {
            id,
            mobile: MobileState {
                x_m: r * theta.cos(),
                y_m: r * theta.sin(),
                velocity_kmh: velocity,
                heading_rad: heading,
                mean_heading_rad: heading,
            },
            assigned_at: (r * theta.cos(), r * theta.sin()),
            last_mobility_update_s: join_s,
            // Placeholder until the policy assigns; no transmission is
            // scheduled before that.
            params: TransmissionParams {
                sf: 7,
                bandwidth_hz: 125_000,
                coding_rate: 5,
                power_dbm: 14,
                channel: 0,
            },
            observed_distance_m: 0.0,
            window: VecDeque::with_capacity(self.cfg.pdr_window),
            tx_count: 0,
            delivered_count: 0,
            energy_j: 0.0,
            traffic_rng: ChaCha12Rng::seed_from_u64(stream_seed(self.cfg.seed, counter, 1)),
            mobility_rng,
            noise_rng: ChaCha12Rng::seed_from_u64(stream_seed(self.cfg.seed, counter, 3)),
        };
        ed.observed_distance_m = ed.estimate_distance(&self.cfg.phy);
        ed
    }

    fn schedule_next_tx(&mut self, ed_id: usize, from_s: f64) {
        let gap = next_arrival(self.cfg.mean_interarrival_s, &mut self.eds[ed_id].traffic_rng);
        let delay = tx_delay(self.cfg.mac, ed_id, self.cfg.u_d_us, self.cfg.mean_interarrival_s);
        let at = from_s + gap + delay;
        if at < self.horizon_s {
            let seq = self.next_seq();
            self.push_event(Event::attempt(at, seq, ed_id, 0));
        }
    }

    /// Runs one episode under `policy`: empty cell, one new device per
    /// step, feedback after each step window.
    pub fn run_episode(
        &mut self,
        policy: &mut dyn AllocationPolicy,
    ) -> Result<EpisodeMetrics, SimError> {
        policy.begin_episode();
        self.eds.clear();
        self.active.iter_mut().for_each(Vec::clear);
        self.heap.clear();
        self.episode_accum = Accum::default();
        self.refresh_exempt = None;

        let episode_start = self.clock_s;
        let n = self.cfg.n_eds;
        self.horizon_s = episode_start + n as f64 * self.window_s;

        let mut incoming = Some(self.create_ed(0, episode_start));
        for step_idx in 0..n {
            let mut ed = incoming.take().expect("device prepared for this step");
            let window_end = episode_start + (step_idx + 1) as f64 * self.window_s;

            let obs = DeviceObservation {
                ed_id: ed.id,
                distance_m: ed.observed_distance_m,
                radius_m: self.cfg.radius_m,
            };
            let chosen = policy.assign(&obs, None)?;
            self.check_channel(&chosen)?;
            let feedback_airtime = chosen.time_on_air(self.cfg.payload_bytes, &self.cfg.phy);
            let feedback_power = chosen.power_dbm;

            let assignment_lost = self.cfg.assign_loss_prob > 0.0
                && self.control_rng.random::<f64>() < self.cfg.assign_loss_prob;
            let actual = if assignment_lost { policy.fallback_params(&chosen) } else { chosen };
            self.check_channel(&actual)?;
            ed.params = actual;
            ed.assigned_at = (ed.mobile.x_m, ed.mobile.y_m);

            self.refresh_exempt = Some(ed.id);
            self.eds.push(ed);
            self.schedule_next_tx(step_idx, self.clock_s);
            self.run_until(window_end, policy)?;

            let terminal = step_idx + 1 == n;
            let next_distance_m = if terminal {
                0.0
            } else {
                let next = self.create_ed(step_idx + 1, window_end);
                let d = next.observed_distance_m;
                incoming = Some(next);
                d
            };
            policy.step_feedback(&StepFeedback {
                ed_id: step_idx,
                pdr: self.eds[step_idx].pdr_estimate(),
                airtime_s: feedback_airtime,
                power_dbm: feedback_power,
                next_distance_m,
                terminal,
            })?;
        }

        self.drain(policy)?;
        self.clock_s = self.clock_s.max(self.horizon_s);

        if self.episode_accum.sent == 0 {
            return Err(SimError::NoData);
        }
        let a = &self.episode_accum;
        Ok(EpisodeMetrics {
            sent: a.sent,
            delivered: a.delivered,
            pdr: a.delivered as f64 / a.sent as f64,
            per_sf_sent: a.per_sf_sent,
            per_sf_alloc: a.per_sf_alloc(),
            per_sf_pdr: a.per_sf_pdr(),
            energy_mj_mean: 1000.0 * a.energy_j / a.sent as f64,
        })
    }

    fn run_until(&mut self, t_end: f64, policy: &mut dyn AllocationPolicy) -> Result<(), SimError> {
        while let Some(Reverse(ev)) = self.heap.peek() {
            if ev.time_s > t_end {
                break;
            }
            let ev = self.heap.pop().expect("peeked").0;
            self.clock_s = ev.time_s;
            match ev.kind {
                EventKind::Attempt { ed_id, tries } => self.handle_attempt(ed_id, tries, policy)?,
                EventKind::End { channel, uid } => self.handle_end(channel, uid, policy)?,
            }
        }
        self.clock_s = t_end;
        Ok(())
    }

    /// After the last step window: no new transmissions start, in-flight
    /// ones are carried to completion.
    fn drain(&mut self, policy: &mut dyn AllocationPolicy) -> Result<(), SimError> {
        while let Some(Reverse(ev)) = self.heap.pop() {
            if let EventKind::End { channel, uid } = ev.kind {
                self.clock_s = ev.time_s;
                self.handle_end(channel, uid, policy)?;
            }
        }
        Ok(())
    }

    fn maybe_refresh(
        &mut self,
        ed_id: usize,
        policy: &mut dyn AllocationPolicy,
    ) -> Result<(), SimError> {
        if self.refresh_exempt == Some(ed_id) {
            return Ok(());
        }
        let wants = match policy.refresh_cadence() {
            RefreshCadence::Never => false,
            RefreshCadence::EveryTx => true,
            RefreshCadence::OnDrift => {
                let ed = &self.eds[ed_id];
                let (ax, ay) = ed.assigned_at;
                let drift = (ed.mobile.x_m - ax).hypot(ed.mobile.y_m - ay);
                drift > self.cfg.drift_refresh_fraction * self.cfg.radius_m
            }
        };
        if !wants {
            return Ok(());
        }
        let distance_m = self.eds[ed_id].estimate_distance(&self.cfg.phy);
        let obs = DeviceObservation { ed_id, distance_m, radius_m: self.cfg.radius_m };
        if let Some(params) = policy.refresh(&obs, None) {
            self.check_channel(&params)?;
            let ed = &mut self.eds[ed_id];
            ed.params = params;
            ed.assigned_at = (ed.mobile.x_m, ed.mobile.y_m);
            ed.observed_distance_m = distance_m;
        }
        Ok(())
    }

    fn csma_busy(&self, ed_id: usize) -> bool {
        let ed = &self.eds[ed_id];
        let channel = ed.params.channel;
        self.active[channel].iter().any(|tx| {
            let d = (ed.mobile.x_m - tx.origin.0).hypot(ed.mobile.y_m - tx.origin.1).max(0.1);
            let heard =
                self.cfg.phy.received_power(tx.params.power_dbm, d).expect("positive distance");
            heard >= self.cfg.csma_sense_dbm
        })
    }

    fn handle_attempt(
        &mut self,
        ed_id: usize,
        tries: u32,
        policy: &mut dyn AllocationPolicy,
    ) -> Result<(), SimError> {
        let now = self.clock_s;
        {
            let (mobility, radius) = (self.cfg.mobility, self.cfg.radius_m);
            self.eds[ed_id].advance_mobility(&mobility, radius, now);
        }
        self.maybe_refresh(ed_id, policy)?;

        if self.cfg.mac == MacProtocol::Csma
            && tries < self.cfg.csma_max_tries
            && self.csma_busy(ed_id)
        {
            let seq = self.next_seq();
            self.push_event(Event::attempt(now + self.cfg.csma_backoff_s, seq, ed_id, tries + 1));
            return Ok(());
        }

        // Transmission starts now.
        let params = self.eds[ed_id].params;
        let rssi = self.eds[ed_id].gateway_rssi(&self.cfg.phy);
        let origin = (self.eds[ed_id].mobile.x_m, self.eds[ed_id].mobile.y_m);
        let airtime = params.time_on_air(self.cfg.payload_bytes, &self.cfg.phy);
        let reachable = rssi >= self.cfg.phy.sensitivity(params.sf);
        let uid = self.next_uid;
        self.next_uid += 1;

        let mut tx = ActiveTx {
            uid,
            ed_id,
            params,
            rssi_dbm: rssi,
            start_s: now,
            end_s: now + airtime,
            origin,
            reachable,
            doomed: false,
        };
        // Pairwise interference marking against everything already on the
        // channel; every active transmission overlaps the new one.
        let sir = self.medium.sir().clone();
        for other in &mut self.active[params.channel] {
            if tx.rssi_dbm - other.rssi_dbm < sir.threshold(tx.params.sf, other.params.sf) {
                tx.doomed = true;
            }
            if other.rssi_dbm - tx.rssi_dbm < sir.threshold(other.params.sf, tx.params.sf) {
                other.doomed = true;
            }
        }
        self.active[params.channel].push(tx);
        let seq = self.next_seq();
        self.push_event(Event::end(now + airtime, seq, params.channel, uid));
        Ok(())
    }

    fn handle_end(
        &mut self,
        channel: usize,
        uid: u64,
        policy: &mut dyn AllocationPolicy,
    ) -> Result<(), SimError> {
        let idx = self.active[channel]
            .iter()
            .position(|tx| tx.uid == uid)
            .expect("active transmission for end event");
        let tx = self.active[channel].remove(idx);

        let jammed = self.medium.jammed(channel, tx.start_s);
        let delivered = tx.reachable && !tx.doomed && !jammed;
        let energy = self.cfg.phy.tx_energy(&tx.params, self.cfg.payload_bytes)?;

        let ed = &mut self.eds[tx.ed_id];
        ed.record_outcome(delivered, self.cfg.pdr_window);
        ed.energy_j += energy;

        let epoch = (tx.start_s / self.epoch_len_s).floor() as u64;
        self.epoch_accums.entry(epoch).or_default().record(tx.params.sf, delivered, energy);
        self.episode_accum.record(tx.params.sf, delivered, energy);

        if self.cfg.record_transcript {
            self.transcript.push((
                Transmission::new(
                    tx.ed_id,
                    channel,
                    tx.params.sf,
                    tx.rssi_dbm,
                    tx.start_s,
                    tx.end_s,
                )
                .expect("valid transmission"),
                delivered,
            ));
        }

        policy.transmission_feedback(tx.ed_id, delivered);
        self.schedule_next_tx(tx.ed_id, tx.end_s);
        Ok(())
    }
}
