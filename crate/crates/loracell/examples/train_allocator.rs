//! Trains the deep-Q allocator on a small single-channel cell, watching
//! the delivery ratio climb as exploration anneals, then saves the
//! learned weights and reloads them into a fresh policy for a frozen
//! evaluation episode.
//!
//! ```text
//! cargo run --release -p loracell --example train_allocator
//! ```

use loracell::agent::{AgentConfig, RewardWeights};
use loracell::policy::{ActionSpace, AllocationPolicy, DrlPolicy};
use loracell::sim::{SimConfig, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        n_eds: 50,
        radius_m: 3000.0,
        mean_interarrival_s: 60.0,
        seed: 42,
        ..SimConfig::default()
    };

    let space = ActionSpace::new(cfg.channels, vec![7, 8, 9, 10, 11, 12], vec![14], 125_000, 5)?;
    // A short horizon suits this task: one assignment barely changes the
    // next arrival's state, so heavy bootstrapping only adds noise. The
    // warmup must clear well before exploration anneals away, or the
    // agent would turn greedy on an untrained network.
    let agent = AgentConfig {
        discount: 0.3,
        eps_decrement: 5e-4,
        warmup: 200,
        replay_capacity: 2000,
        target_sync_interval: 250,
        ..AgentConfig::default()
    };
    let reward = RewardWeights { beta: 0.3, ..RewardWeights::default() };
    let mut policy = DrlPolicy::new(space.clone(), agent.clone(), reward, 7)?;

    // Train for a fixed number of episodes; each episode rebuilds the
    // cell device by device while the agent learns from step feedback.
    let mut sim = Simulation::new(cfg.clone())?;
    println!("episode  epochs_done  mean_pdr");
    for episode in 0..40 {
        sim.run_episode(&mut policy)?;
        let done: Vec<_> = sim.take_completed_epochs();
        let mean = done.iter().map(|m| m.pdr).sum::<f64>() / done.len().max(1) as f64;
        if episode % 5 == 4 {
            println!("{episode:7} {:12} {mean:9.3}", done.last().map_or(0, |m| m.epoch) + 1);
        }
    }

    let path = std::env::temp_dir().join("train_allocator_demo.qnet");
    policy.agent().save(&path)?;
    println!("saved weights to {}", path.display());

    // A fresh policy, the saved weights, greedy actions only.
    let mut reloaded = DrlPolicy::new(space, agent, reward, 99)?;
    reloaded.agent_mut().load_weights(&path)?;
    reloaded.set_eval(true);

    for (label, seed) in [("the training cell", 42u64), ("an unseen cell", 4242)] {
        let mut eval_sim = Simulation::new(SimConfig { seed, ..cfg.clone() })?;
        let metrics = eval_sim.run_episode(&mut reloaded)?;
        println!(
            "frozen evaluation on {label}: {} sent, {} delivered, pdr {:.3}",
            metrics.sent, metrics.delivered, metrics.pdr
        );
    }
    Ok(())
}
