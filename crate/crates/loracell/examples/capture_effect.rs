//! Collision resolution on the shared medium: the capture effect
//! between same-SF frames and the imperfect orthogonality between
//! different spreading factors.
//!
//! ```text
//! cargo run --release -p loracell --example capture_effect
//! ```

use loracell::medium::{resolve, SirMatrix, Transmission};

fn outcome(survived: &[bool]) -> String {
    survived
        .iter()
        .enumerate()
        .map(|(i, &ok)| format!("tx{i} {}", if ok { "ok" } else { "lost" }))
        .collect::<Vec<_>>()
        .join(", ")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sir = SirMatrix::measured();

    // Two SF7 frames overlap. Same-SF capture needs roughly a 1 dB
    // margin: equal powers destroy both, a stronger frame survives.
    println!("co-SF collision, SF7 vs SF7:");
    for margin_db in [0.0, 0.5, 3.0] {
        let txs = [
            Transmission::new(0, 0, 7, -100.0 + margin_db, 0.0, 0.1)?,
            Transmission::new(1, 0, 7, -100.0, 0.02, 0.12)?,
        ];
        println!("  margin {margin_db:>4.1} dB: {}", outcome(&resolve(&txs, &sir)));
    }

    // Cross-SF interference: spreading factors are nearly orthogonal,
    // so an SF12 frame tolerates an overlapping SF7 even when the SF7
    // is much stronger — until the imbalance exceeds its rejection
    // threshold.
    println!("\ninter-SF collision, weak SF12 under a strong SF7:");
    for sf7_dbm in [-90.0, -80.0, -70.0] {
        let txs = [
            Transmission::new(0, 0, 12, -110.0, 0.0, 2.0)?,
            Transmission::new(1, 0, 7, sf7_dbm, 0.5, 0.6)?,
        ];
        println!(
            "  SF7 at {sf7_dbm:>6.1} dBm (SIR {:>5.1} dB, threshold {} dB): {}",
            -110.0 - sf7_dbm,
            sir.threshold(12, 7),
            outcome(&resolve(&txs, &sir)),
        );
    }

    // Different channels never interact, and back-to-back frames that
    // merely touch do not overlap.
    println!("\nno interaction cases:");
    let txs = [
        Transmission::new(0, 0, 9, -100.0, 0.0, 0.4)?,
        Transmission::new(1, 1, 9, -100.0, 0.0, 0.4)?,
        Transmission::new(2, 0, 9, -100.0, 0.4, 0.8)?,
    ];
    println!("  other channel / touching endpoints: {}", outcome(&resolve(&txs, &sir)));
    Ok(())
}
