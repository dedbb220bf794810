//! Head-to-head of all four allocation policies on one mid-sized cell,
//! run through the same study machinery the CLI uses: train where
//! applicable, then evaluate frozen, and read the steady-state summary.
//!
//! ```text
//! cargo run --release -p loracell --example compare_policies
//! ```

use loracell::harness::{
    experiment_agent, experiment_reward, experiment_sim, run_study, Condition, PolicyChoice,
    RunOptions, Study,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sim = experiment_sim();
    sim.n_eds = 100;
    sim.channels = 2;

    let study = Study {
        name: "shootout".into(),
        conditions: vec![Condition { label: "cell".into(), sim }],
        policies: vec![
            PolicyChoice::Drl,
            PolicyChoice::Rule,
            PolicyChoice::Exp3,
            PolicyChoice::Random,
        ],
        agent: experiment_agent(),
        reward: experiment_reward(),
        epochs: 400,
        eval_episodes: 3,
        replications: 1,
        seed: 11,
        powers_dbm: vec![14],
        exp3_eta: 1.5,
        exp3_eta_mix: 0.02,
        train_condition: None,
    };

    let out = std::env::temp_dir().join("compare_policies_demo");
    let report = run_study(&study, &out, &RunOptions::default())?;

    println!("steady-state evaluation, {} devices on {} channels:\n", 100, 2);
    println!("{:>8} {:>8} {:>12} {:>18}", "policy", "pdr", "energy mJ", "top SF (share)");
    for (_, row) in &report.summary {
        let (top_sf, share) = row
            .per_sf_alloc
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, s)| (i + 7, s))
            .unwrap();
        println!(
            "{:>8} {:>8.4} {:>12.2} {:>13} ({:.0}%)",
            row.policy,
            row.pdr_mean,
            row.energy_mj_mean,
            format!("SF{top_sf}"),
            100.0 * share
        );
    }
    println!("\nfull curves and checkpoints under {}", report.out_dir.display());
    Ok(())
}
