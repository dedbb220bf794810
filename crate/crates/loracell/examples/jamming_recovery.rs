//! Mid-run interference adaptation: one of two channels starts being
//! jammed partway through a long run. The learned allocator keeps
//! training online and migrates traffic to the surviving channel; the
//! rule-based baseline splits traffic blindly and never recovers.
//!
//! ```text
//! cargo run --release -p loracell --example jamming_recovery
//! ```

use loracell::harness::{
    experiment_agent, experiment_reward, experiment_sim, run_study, Condition, PolicyChoice,
    RunOptions, Study,
};
use loracell::sim::{JamConfig, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A shortened version of the `jamming` preset: the jammer switches
    // on at epoch 150 of 400.
    let jam_epoch = 150;
    let sim = SimConfig {
        channels: 2,
        jam: Some(JamConfig { at_epoch: jam_epoch, channel: 1 }),
        ..experiment_sim()
    };

    let study = Study {
        name: "jam-demo".into(),
        conditions: vec![Condition { label: "jam".into(), sim }],
        policies: vec![PolicyChoice::Drl, PolicyChoice::Rule],
        agent: experiment_agent(),
        reward: experiment_reward(),
        epochs: 400,
        eval_episodes: 0,
        replications: 1,
        seed: 5,
        powers_dbm: vec![14],
        exp3_eta: 1.5,
        exp3_eta_mix: 0.02,
        train_condition: None,
    };

    let out = std::env::temp_dir().join("jamming_recovery_demo");
    let report = run_study(&study, &out, &RunOptions::default())?;

    println!("online PDR in 50-epoch blocks (jammer on at epoch {jam_epoch}):\n");
    println!("{:>12} {:>8} {:>8}", "epochs", "drl", "rule");
    for block in 0..8 {
        let (lo, hi) = (block * 50, block * 50 + 50);
        let mean = |policy: &str| {
            let rows = &report.train_curves[&("jam".to_string(), policy.to_string())];
            let vals: Vec<f64> =
                rows.iter().filter(|r| (lo..hi).contains(&r.epoch)).map(|r| r.pdr_mean).collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        };
        let marker = if lo == jam_epoch { "  <- jammer on" } else { "" };
        println!("{:>5}..{:<5} {:>8.3} {:>8.3}{marker}", lo, hi, mean("drl"), mean("rule"));
    }
    Ok(())
}
