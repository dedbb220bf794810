//! Discrete-event simulator of a single-gateway LoRa cell with a pluggable
//! transmission-parameter allocation layer.
//!
//! The crate is organised bottom-up:
//!
//! * [`phy`] — LoRa physical-layer arithmetic: bit rate, time on air,
//!   log-distance path loss, sensitivity thresholds, transmit energy.
//! * [`medium`] — the shared radio medium: pairwise SIR collision
//!   resolution with capture effect, imperfect spreading-factor
//!   orthogonality, and scheduled channel jamming.
//! * [`sim`] — the cell itself: end devices, Poisson traffic, Gauss-Markov
//!   mobility, MAC disciplines, and the episode-driven event loop.
//! * [`nn`] — a small hand-rolled feed-forward Q-network with Adam/SGD
//!   training and a binary checkpoint format.
//! * [`agent`] — a double-deep-Q-learning agent: replay memory, epsilon
//!   schedule, reward shaping, target-network bootstrapping.
//! * [`policy`] — the allocation policies: the DQN allocator plus
//!   rule-based, adversarial-bandit (EXP3), and uniform-random baselines.
//! * [`harness`] — experiment presets, replication aggregation, CSV and
//!   plot-data emission, and the scenario runner used by the CLI.
//!
//! Every run is deterministic: the same configuration and seed produce
//! byte-identical output files.
//!
//! See the crate examples for runnable entry points into each layer
//! (`cargo run --release -p loracell --example compare_policies`), or
//! the `loracell` binary for the scenario CLI.

pub mod agent;
pub mod harness;
pub mod medium;
pub mod nn;
pub mod phy;
pub mod policy;
pub mod sim;

pub use agent::{AgentConfig, AgentState, DqnAgent, Experience, ReplayBuffer, RewardWeights};
pub use harness::{run_study, PolicyChoice, Scenario, Study, StudyReport};
pub use medium::{resolve, Medium, SirMatrix, Transmission};
pub use nn::QNetwork;
pub use phy::{PhyConfig, PhyError, TransmissionParams};
pub use policy::{ActionSpace, AllocationPolicy};
pub use sim::{MacProtocol, MobilityModel, SimConfig, Simulation};
