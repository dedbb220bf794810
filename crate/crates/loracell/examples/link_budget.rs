//! Physical-layer arithmetic: bit rates, frame airtimes, transmit
//! energy, and the maximum range of every spreading factor under the
//! default log-distance channel.
//!
//! ```text
//! cargo run --release -p loracell --example link_budget
//! ```

use loracell::phy::{PhyConfig, TransmissionParams, SPREADING_FACTORS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phy = PhyConfig::default();
    let payload_bytes = 50;
    let power_dbm = 14;

    println!(
        "channel model: exponent {}, d0 {} m, reference loss {} dB",
        phy.path_loss_exponent, phy.ref_distance_m, phy.ref_loss_db
    );
    println!("frame: {payload_bytes} byte payload at {power_dbm} dBm, 125 kHz, CR 4/5\n");

    println!(
        "{:>3} {:>12} {:>11} {:>11} {:>13} {:>9}",
        "SF", "bit rate b/s", "airtime s", "energy mJ", "sensit. dBm", "range m"
    );
    for sf in SPREADING_FACTORS {
        let params = TransmissionParams::new(sf, 125_000, 5, power_dbm, 0)?;
        let airtime = params.time_on_air(payload_bytes, &phy);
        let energy_mj = 1000.0 * phy.tx_energy(&params, payload_bytes)?;
        println!(
            "{:>3} {:>12.2} {:>11.6} {:>11.4} {:>13.1} {:>9.0}",
            sf,
            params.bit_rate(),
            airtime,
            energy_mj,
            phy.sensitivity(sf),
            phy.max_range_m(sf, power_dbm),
        );
    }

    // The same budget read the other way: what a gateway hears from a
    // device walking away from it, and the slowest-to-fastest order in
    // which spreading factors drop out.
    println!("\n{:>9} {:>11} {:>22}", "dist m", "rssi dBm", "fastest reachable SF");
    for distance_m in [50.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0] {
        let rssi = phy.received_power(power_dbm, distance_m)?;
        let fastest = SPREADING_FACTORS.into_iter().find(|&sf| rssi >= phy.sensitivity(sf));
        println!(
            "{:>9.0} {:>11.2} {:>22}",
            distance_m,
            rssi,
            fastest.map_or("out of range".into(), |sf| format!("SF{sf}")),
        );
    }
    Ok(())
}
