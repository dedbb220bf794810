//! Result rows, replication statistics, and file emission.
//!
//! Every CSV the harness writes shares one schema so downstream tooling
//! needs a single parser. Numeric metric fields use fixed six-decimal
//! formatting, which together with the deterministic simulator makes
//! same-seed reruns byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

/// The exact header of every emitted CSV.
pub const CSV_HEADER: &str = "epoch,policy,n_eds,velocity_kmh,channels,\
pdr_mean,pdr_ci95,energy_mj_mean,\
per_sf_alloc_7,per_sf_alloc_8,per_sf_alloc_9,per_sf_alloc_10,per_sf_alloc_11,per_sf_alloc_12,\
per_sf_pdr_7,per_sf_pdr_8,per_sf_pdr_9,per_sf_pdr_10,per_sf_pdr_11,per_sf_pdr_12,seed";

/// One output row: a metric aggregate for one epoch (or one summary
/// point) of one policy under one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub epoch: u64,
    pub policy: String,
    pub n_eds: usize,
    pub velocity_kmh: f64,
    pub channels: usize,
    pub pdr_mean: f64,
    pub pdr_ci95: f64,
    pub energy_mj_mean: f64,
    pub per_sf_alloc: [f64; 6],
    pub per_sf_pdr: [f64; 6],
    pub seed: u64,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{},{},{},{:.6},{},{:.6},{:.6},{:.6}",
            self.epoch,
            self.policy,
            self.n_eds,
            self.velocity_kmh,
            self.channels,
            self.pdr_mean,
            self.pdr_ci95,
            self.energy_mj_mean,
        );
        for v in self.per_sf_alloc {
            line.push_str(&format!(",{v:.6}"));
        }
        for v in self.per_sf_pdr {
            line.push_str(&format!(",{v:.6}"));
        }
        line.push_str(&format!(",{}", self.seed));
        line
    }
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    fs::write(path, out)
}

/// Plot-ready data: named two-column series separated by blank lines
/// (gnuplot's `index` convention), one file per figure.
pub fn write_plotdata(path: &Path, series: &[(String, Vec<(f64, f64)>)]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = fs::File::create(path)?;
    for (i, (name, points)) in series.iter().enumerate() {
        if i > 0 {
            writeln!(file)?;
            writeln!(file)?;
        }
        writeln!(file, "# series: {name}")?;
        for (x, y) in points {
            writeln!(file, "{x:.6} {y:.6}")?;
        }
    }
    Ok(())
}

/// Two-sided Student-t 0.975 quantiles for 1..=30 degrees of freedom;
/// larger samples use the normal quantile.
const T95: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

/// Sample mean and 95% confidence half-width across replications.
/// A single replication has no spread estimate and reports width zero.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "at least one replication required");
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let df = n - 1;
    let t = if df <= 30 { T95[df - 1] } else { 1.96 };
    (mean, t * se)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> CsvRow {
        CsvRow {
            epoch: 900,
            policy: "drl".into(),
            n_eds: 100,
            velocity_kmh: 30.0,
            channels: 2,
            pdr_mean: 0.912345678,
            pdr_ci95: 0.01,
            energy_mj_mean: 14.1622272,
            per_sf_alloc: [0.5, 0.2, 0.1, 0.1, 0.05, 0.05],
            per_sf_pdr: [1.0, 0.9, 0.8, 0.7, 0.6, 0.5],
            seed: 42,
        }
    }

    #[test]
    fn header_matches_the_schema_exactly() {
        assert_eq!(
            CSV_HEADER,
            "epoch,policy,n_eds,velocity_kmh,channels,pdr_mean,pdr_ci95,energy_mj_mean,\
per_sf_alloc_7,per_sf_alloc_8,per_sf_alloc_9,per_sf_alloc_10,per_sf_alloc_11,per_sf_alloc_12,\
per_sf_pdr_7,per_sf_pdr_8,per_sf_pdr_9,per_sf_pdr_10,per_sf_pdr_11,per_sf_pdr_12,seed"
        );
        assert_eq!(CSV_HEADER.split(',').count(), 21);
    }

    #[test]
    fn rows_use_fixed_six_decimal_formatting() {
        let line = sample_row().to_line();
        assert_eq!(line.split(',').count(), 21);
        assert!(line.starts_with("900,drl,100,30.000000,2,0.912346,0.010000,14.162227,"));
        assert!(line.ends_with(",42"));
        for field in line.split(',').skip(5).take(14) {
            let (_, frac) = field.split_once('.').expect("metric fields carry decimals");
            assert_eq!(frac.len(), 6, "field {field}");
        }
    }

    #[test]
    fn csv_files_are_reproducible_byte_for_byte() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let rows = vec![sample_row(), sample_row()];
        write_csv(&a, &rows).unwrap();
        write_csv(&b, &rows).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let text = fs::read_to_string(&a).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn mean_ci_reference_values() {
        let (m, ci) = mean_ci95(&[0.8, 0.9]);
        assert!((m - 0.85).abs() < 1e-12);
        // s = 0.0707..., se = 0.05, t(df=1) = 12.706.
        assert!((ci - 12.706 * 0.05).abs() < 1e-9, "ci {ci}");

        let (m, ci) = mean_ci95(&[0.7]);
        assert_eq!((m, ci), (0.7, 0.0), "single replication has no spread");
    }

    #[test]
    fn mean_ci_is_order_independent() {
        let a = mean_ci95(&[0.1, 0.5, 0.9, 0.3]);
        let b = mean_ci95(&[0.9, 0.1, 0.3, 0.5]);
        assert_eq!(a, b);
    }

    #[test]
    fn large_samples_fall_back_to_the_normal_quantile() {
        let values: Vec<f64> = (0..40).map(|i| 0.5 + 0.001 * f64::from(i)).collect();
        let (_, ci) = mean_ci95(&values);
        let mean = values.iter().sum::<f64>() / 40.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 39.0;
        let expect = 1.96 * (var / 40.0).sqrt();
        assert!((ci - expect).abs() < 1e-12);
    }

    #[test]
    fn plotdata_blocks_are_blank_line_separated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig.dat");
        write_plotdata(
            &path,
            &[("drl".into(), vec![(0.0, 0.9), (1.0, 0.95)]), ("rule".into(), vec![(0.0, 0.8)])],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# series: drl\n0.000000 0.900000\n1.000000 0.950000\n\n\n# series: rule\n0.000000 0.800000\n"
        );
    }
}
