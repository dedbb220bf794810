//! LoRa physical-layer arithmetic.
//!
//! Pure functions over transmission parameters: nominal bit rate, time on
//! air (Semtech SX127x frame timing), log-distance path loss with optional
//! shadowing handled by the caller, per-SF receiver sensitivity, and
//! transmit-side energy cost.
//!
//! # Example
//!
//! ```
//! use loracell::phy::{PhyConfig, TransmissionParams};
//!
//! let phy = PhyConfig::default();
//! let params = TransmissionParams::new(7, 125_000, 5, 14, 0).unwrap();
//! assert_eq!(params.bit_rate(), 5468.75);
//! let airtime = params.time_on_air(50, &phy);
//! assert!((airtime - 0.097536).abs() < 1e-12);
//! ```

use thiserror::Error;

/// Spreading factors supported by the cell, lowest (fastest) first.
pub const SPREADING_FACTORS: [u8; 6] = [7, 8, 9, 10, 11, 12];

/// Errors from parameter validation and link-budget queries.
#[derive(Debug, Error)]
pub enum PhyError {
    #[error("invalid transmission parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate distance {0} m (must be > 0)")]
    DegenerateDistance(f64),
    #[error("no TX current entry for {0} dBm")]
    NoCurrentEntry(i8),
    #[error("invalid phy config: {0}")]
    InvalidConfig(String),
}

/// The radio settings of a single uplink transmission.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransmissionParams {
    /// Spreading factor, 7..=12.
    pub sf: u8,
    /// Bandwidth in Hz: 125, 250 or 500 kHz.
    pub bandwidth_hz: u32,
    /// Coding-rate denominator `x` in `4/x`, 5..=8.
    pub coding_rate: u8,
    /// Transmit power in dBm, 2..=20.
    pub power_dbm: i8,
    /// Channel index within the cell's frequency plan.
    pub channel: usize,
}

impl TransmissionParams {
    /// Validates and builds a parameter set.
    pub fn new(
        sf: u8,
        bandwidth_hz: u32,
        coding_rate: u8,
        power_dbm: i8,
        channel: usize,
    ) -> Result<Self, PhyError> {
        if !(7..=12).contains(&sf) {
            return Err(PhyError::InvalidParams(format!("sf {sf} outside 7..=12")));
        }
        if ![125_000, 250_000, 500_000].contains(&bandwidth_hz) {
            return Err(PhyError::InvalidParams(format!(
                "bandwidth {bandwidth_hz} Hz not one of 125/250/500 kHz"
            )));
        }
        if !(5..=8).contains(&coding_rate) {
            return Err(PhyError::InvalidParams(format!(
                "coding rate denominator {coding_rate} outside 5..=8"
            )));
        }
        if !(2..=20).contains(&power_dbm) {
            return Err(PhyError::InvalidParams(format!("power {power_dbm} dBm outside 2..=20")));
        }
        Ok(Self { sf, bandwidth_hz, coding_rate, power_dbm, channel })
    }

    /// Nominal PHY bit rate in bit/s:
    /// `SF * (BW / 2^SF) * (4 / coding_rate)`.
    pub fn bit_rate(&self) -> f64 {
        let sf = self.sf as f64;
        let chips = f64::from(self.bandwidth_hz) / 2f64.powi(i32::from(self.sf));
        sf * chips * (4.0 / f64::from(self.coding_rate))
    }

    /// Symbol duration in seconds: `2^SF / BW`.
    pub fn symbol_time(&self) -> f64 {
        2f64.powi(i32::from(self.sf)) / f64::from(self.bandwidth_hz)
    }

    /// Whether low-data-rate optimisation applies under `phy`'s rule.
    pub fn ldro(&self, phy: &PhyConfig) -> bool {
        self.sf >= phy.ldro_min_sf && self.bandwidth_hz == 125_000
    }

    /// Frame time on air in seconds for `payload_bytes` of MAC payload,
    /// per the SX127x timing formula: preamble of `n_pre + 4.25` symbols
    /// plus `8 + max(ceil((8*PL - 4*SF + 28 + 16*CRC - 20*IH) /
    /// (4*(SF - 2*DE))) * coding_rate, 0)` payload symbols.
    pub fn time_on_air(&self, payload_bytes: u32, phy: &PhyConfig) -> f64 {
        let t_sym = self.symbol_time();
        let preamble = (f64::from(phy.preamble_symbols) + 4.25) * t_sym;

        let de = i64::from(self.ldro(phy));
        let ih = i64::from(!phy.explicit_header);
        let crc = i64::from(phy.crc);
        let numer = 8 * i64::from(payload_bytes) - 4 * i64::from(self.sf) + 28 + 16 * crc - 20 * ih;
        let denom = 4 * (i64::from(self.sf) - 2 * de);
        let payload_symbols = if numer > 0 {
            8 + (numer + denom - 1) / denom * i64::from(self.coding_rate)
        } else {
            8
        };

        preamble + payload_symbols as f64 * t_sym
    }
}

/// Propagation, sensitivity and power-draw model of the cell.
///
/// Defaults: log-distance path loss with exponent 2.08, 40 m reference
/// distance and 107.41 dB reference loss — calibrated so a 14 dBm SF12
/// uplink from a 4500 m cell edge lands just above the −137 dBm SF12
/// sensitivity floor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    /// Log-distance path-loss exponent.
    pub path_loss_exponent: f64,
    /// Reference distance `d0` in metres.
    pub ref_distance_m: f64,
    /// Path loss at `d0` in dB.
    pub ref_loss_db: f64,
    /// Std-dev of zero-mean Gaussian shadowing in dB (0 disables it).
    /// The noise itself is drawn by the simulation, not here.
    pub shadowing_sigma_db: f64,
    /// Receiver sensitivity in dBm for SF7..SF12, strictly decreasing.
    pub sensitivity_dbm: [f64; 6],
    /// Radio supply voltage in volts.
    pub supply_voltage_v: f64,
    /// TX current draw in mA per supported power setting, ascending.
    pub tx_current_ma: Vec<(i8, f64)>,
    /// Programmed preamble length in symbols (the 4.25 sync tail is added
    /// by the timing formula).
    pub preamble_symbols: u16,
    /// Explicit PHY header on the frame.
    pub explicit_header: bool,
    /// Payload CRC on the frame.
    pub crc: bool,
    /// Lowest SF that enables low-data-rate optimisation at 125 kHz.
    pub ldro_min_sf: u8,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            path_loss_exponent: 2.08,
            ref_distance_m: 40.0,
            ref_loss_db: 107.41,
            shadowing_sigma_db: 0.0,
            sensitivity_dbm: [-123.0, -126.0, -129.0, -132.0, -134.5, -137.0],
            supply_voltage_v: 3.3,
            tx_current_ma: vec![
                (2, 24.0),
                (5, 25.0),
                (8, 25.0),
                (11, 32.0),
                (14, 44.0),
                (17, 82.0),
                (20, 125.0),
            ],
            preamble_symbols: 8,
            explicit_header: true,
            crc: true,
            ldro_min_sf: 11,
        }
    }
}

impl PhyConfig {
    /// Checks internal consistency: sensitivities strictly decreasing with
    /// SF, current table sorted with non-decreasing draw.
    pub fn validate(&self) -> Result<(), PhyError> {
        if self.path_loss_exponent <= 0.0 || self.ref_distance_m <= 0.0 {
            return Err(PhyError::InvalidConfig(
                "path-loss exponent and reference distance must be positive".into(),
            ));
        }
        if !self.sensitivity_dbm.windows(2).all(|w| w[1] < w[0]) {
            return Err(PhyError::InvalidConfig(
                "sensitivities must strictly decrease with SF".into(),
            ));
        }
        if self.tx_current_ma.is_empty() {
            return Err(PhyError::InvalidConfig("empty TX current table".into()));
        }
        let sorted = self.tx_current_ma.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1);
        if !sorted {
            return Err(PhyError::InvalidConfig(
                "TX current table must be ascending in power and draw".into(),
            ));
        }
        Ok(())
    }

    /// Path loss in dB at `distance_m` under the log-distance model.
    pub fn path_loss_db(&self, distance_m: f64) -> Result<f64, PhyError> {
        if distance_m <= 0.0 {
            return Err(PhyError::DegenerateDistance(distance_m));
        }
        Ok(self.ref_loss_db
            + 10.0 * self.path_loss_exponent * (distance_m / self.ref_distance_m).log10())
    }

    /// Mean received power (RSSI) in dBm at the gateway for a transmit
    /// power of `tx_dbm` at `distance_m`. Shadowing, when enabled, is added
    /// on top of this by the simulation.
    pub fn received_power(&self, tx_dbm: i8, distance_m: f64) -> Result<f64, PhyError> {
        Ok(f64::from(tx_dbm) - self.path_loss_db(distance_m)?)
    }

    /// Inverts the path-loss model: the distance at which a transmission
    /// sent at `tx_dbm` is received at `rssi_dbm`. Used by the gateway to
    /// estimate device distance from a join transmission.
    pub fn distance_for_rssi(&self, rssi_dbm: f64, tx_dbm: i8) -> f64 {
        let loss = f64::from(tx_dbm) - rssi_dbm;
        self.ref_distance_m
            * 10f64.powf((loss - self.ref_loss_db) / (10.0 * self.path_loss_exponent))
    }

    /// Receiver sensitivity in dBm for `sf`.
    pub fn sensitivity(&self, sf: u8) -> f64 {
        self.sensitivity_dbm[usize::from(sf - 7)]
    }

    /// Whether a transmission at `sf`/`tx_dbm` from `distance_m` arrives at
    /// or above the receiver's sensitivity floor.
    pub fn reachable(&self, sf: u8, tx_dbm: i8, distance_m: f64) -> Result<bool, PhyError> {
        Ok(self.received_power(tx_dbm, distance_m)? >= self.sensitivity(sf))
    }

    /// Maximum distance in metres at which `sf`/`tx_dbm` still meets the
    /// sensitivity floor.
    pub fn max_range_m(&self, sf: u8, tx_dbm: i8) -> f64 {
        self.distance_for_rssi(self.sensitivity(sf), tx_dbm)
    }

    /// TX current draw in mA at `power_dbm`. Only tabulated power settings
    /// are valid.
    pub fn tx_current(&self, power_dbm: i8) -> Result<f64, PhyError> {
        self.tx_current_ma
            .iter()
            .find(|(p, _)| *p == power_dbm)
            .map(|(_, ma)| *ma)
            .ok_or(PhyError::NoCurrentEntry(power_dbm))
    }

    /// Energy in joules drawn by one transmission:
    /// `V * I(power) * time_on_air`.
    pub fn tx_energy(
        &self,
        params: &TransmissionParams,
        payload_bytes: u32,
    ) -> Result<f64, PhyError> {
        let current_a = self.tx_current(params.power_dbm)? / 1000.0;
        Ok(self.supply_voltage_v * current_a * params.time_on_air(payload_bytes, self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sf: u8) -> TransmissionParams {
        TransmissionParams::new(sf, 125_000, 5, 14, 0).unwrap()
    }

    #[test]
    fn bit_rate_reference_points() {
        assert_eq!(params(7).bit_rate(), 5468.75);
        assert_eq!(params(12).bit_rate(), 292.96875);
        let fast = TransmissionParams::new(7, 250_000, 5, 14, 0).unwrap();
        assert_eq!(fast.bit_rate(), 10_937.5);
    }

    #[test]
    fn time_on_air_reference_points() {
        let phy = PhyConfig::default();
        // 50-byte payload, CR 4/5, 125 kHz, 8-symbol preamble, CRC on.
        let toa7 = params(7).time_on_air(50, &phy);
        assert!((toa7 - 0.097536).abs() < 1e-12, "SF7 airtime {toa7}");
        // SF12 picks up low-data-rate optimisation at 125 kHz.
        let toa12 = params(12).time_on_air(50, &phy);
        assert!((toa12 - 2.301952).abs() < 1e-12, "SF12 airtime {toa12}");
    }

    #[test]
    fn time_on_air_zero_payload_is_preamble_plus_header_symbols() {
        let phy = PhyConfig::default();
        let toa = params(7).time_on_air(0, &phy);
        // The header/CRC overhead keeps the numerator positive with no
        // payload bytes: -4*7 + 28 + 16 = 16, ceil(16/28) = 1 coded block.
        let expected = (12.25 + 8.0 + 5.0) * 0.001024;
        assert!((toa - expected).abs() < 1e-12, "zero-payload airtime {toa}");
    }

    #[test]
    fn time_on_air_increases_with_sf() {
        let phy = PhyConfig::default();
        for pair in SPREADING_FACTORS.windows(2) {
            let lo = params(pair[0]).time_on_air(50, &phy);
            let hi = params(pair[1]).time_on_air(50, &phy);
            assert!(hi > lo, "SF{} {lo} !< SF{} {hi}", pair[0], pair[1]);
        }
    }

    #[test]
    fn received_power_reference_points() {
        let phy = PhyConfig::default();
        let at_ref = phy.received_power(14, 40.0).unwrap();
        assert!((at_ref - -93.41).abs() < 1e-9);
        let at_edge = phy.received_power(14, 4500.0).unwrap();
        assert!((at_edge - -136.074).abs() < 1e-3, "edge rssi {at_edge}");
        // Still above the SF12 floor: the default calibration reaches the
        // whole 4500 m cell at max SF.
        assert!(phy.reachable(12, 14, 4500.0).unwrap());
        assert!(!phy.reachable(11, 14, 4500.0).unwrap());
    }

    #[test]
    fn received_power_rejects_degenerate_distance() {
        let phy = PhyConfig::default();
        assert!(matches!(phy.received_power(14, 0.0), Err(PhyError::DegenerateDistance(_))));
    }

    #[test]
    fn sf7_range_matches_sensitivity_crossing() {
        let phy = PhyConfig::default();
        let range = phy.max_range_m(7, 14);
        assert!((range - 1058.0).abs() < 1.0, "SF7 range {range}");
        assert!(phy.reachable(7, 14, range - 0.1).unwrap());
        assert!(!phy.reachable(7, 14, range + 0.1).unwrap());
    }

    #[test]
    fn distance_inversion_round_trips() {
        let phy = PhyConfig::default();
        for d in [55.0, 430.0, 1058.0, 2700.0, 4499.0] {
            let rssi = phy.received_power(14, d).unwrap();
            let back = phy.distance_for_rssi(rssi, 14);
            assert!((back - d).abs() / d < 1e-12);
        }
    }

    #[test]
    fn tx_energy_reference_point() {
        let phy = PhyConfig::default();
        // 3.3 V * 44 mA * 0.097536 s.
        let e = phy.tx_energy(&params(7), 50).unwrap();
        assert!((e - 0.0141622272).abs() < 1e-9, "energy {e}");
    }

    #[test]
    fn tx_energy_requires_tabulated_power() {
        let phy = PhyConfig::default();
        let p = TransmissionParams::new(7, 125_000, 5, 13, 0).unwrap();
        assert!(matches!(phy.tx_energy(&p, 50), Err(PhyError::NoCurrentEntry(13))));
    }

    #[test]
    fn params_validation_rejects_out_of_range_fields() {
        assert!(TransmissionParams::new(6, 125_000, 5, 14, 0).is_err());
        assert!(TransmissionParams::new(7, 100_000, 5, 14, 0).is_err());
        assert!(TransmissionParams::new(7, 125_000, 9, 14, 0).is_err());
        assert!(TransmissionParams::new(7, 125_000, 5, 21, 0).is_err());
    }

    #[test]
    fn config_validation_checks_orderings() {
        let mut phy = PhyConfig::default();
        phy.validate().unwrap();
        phy.sensitivity_dbm[3] = -120.0;
        assert!(phy.validate().is_err());

        let mut phy = PhyConfig::default();
        phy.tx_current_ma[0].1 = 500.0;
        assert!(phy.validate().is_err());
    }
}
