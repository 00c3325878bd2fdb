//! Run records and their CSV/JSON serializations.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Arm, ExperimentConfig};
use crate::calibration::CalibrationReport;
use crate::error::{Error, Result};
use crate::math::{mean, sample_std};

/// Metrics of one arm at one sweep value in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmRecord {
    pub sweep_value: f64,
    pub replicate: usize,
    pub seed: u64,
    pub arm: Arm,
    /// Named scalar metrics in a fixed order.
    pub metrics: Vec<(String, f64)>,
    /// Full report on the test split, where one was computed.
    pub report: Option<CalibrationReport>,
}

impl ArmRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|m| m.1)
    }
}

/// A named pass/fail statement about a finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub records: Vec<ArmRecord>,
    pub checks: Vec<Check>,
    /// Hard failures: any entry makes the run unsuccessful.
    pub failures: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.records)
    }

    /// Records of one arm at one sweep value, in replicate order.
    pub fn select(&self, sweep_value: f64, arm: Arm) -> Vec<&ArmRecord> {
        self.records
            .iter()
            .filter(|r| r.sweep_value == sweep_value && r.arm == arm)
            .collect()
    }

    pub fn mean_metric(&self, sweep_value: f64, arm: Arm, metric: &str) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.sweep_value == sweep_value && s.arm == arm && s.metric == metric)
            .map(|s| s.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub arm: Arm,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over replicates (0 for a single replicate).
    pub std: f64,
}

/// Long-format row of a per-replicate CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub sweep_value: f64,
    pub replicate: usize,
    pub seed: u64,
    pub arm: Arm,
    pub metric: String,
    pub value: f64,
}

pub const REPLICATE_HEADER: &str = "sweep_value,replicate,seed,arm,metric,value";
pub const SUMMARY_HEADER: &str = "sweep_value,arm,metric,mean,std";

pub fn metric_rows(records: &[ArmRecord]) -> Vec<MetricRow> {
    records
        .iter()
        .flat_map(|r| {
            r.metrics.iter().map(move |(m, v)| MetricRow {
                sweep_value: r.sweep_value,
                replicate: r.replicate,
                seed: r.seed,
                arm: r.arm,
                metric: m.clone(),
                value: *v,
            })
        })
        .collect()
}

/// Mean and standard deviation per (sweep value, arm, metric), in order of
/// first appearance. Replicates are accumulated in the order given.
pub fn summarize_rows(rows: &[MetricRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, Arm, &str)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let key = (r.sweep_value, r.arm, r.metric.as_str());
        match keys.iter().position(|k| k.0 == key.0 && k.1 == key.1 && k.2 == key.2) {
            Some(i) => values[i].push(r.value),
            None => {
                keys.push(key);
                values.push(vec![r.value]);
            }
        }
    }
    keys.into_iter()
        .zip(values)
        .map(|((sweep_value, arm, metric), v)| {
            let (mean, std) = mean_std(&v);
            SummaryRow {
                sweep_value,
                arm,
                metric: metric.to_string(),
                mean,
                std,
            }
        })
        .collect()
}

pub fn summarize(records: &[ArmRecord]) -> Vec<SummaryRow> {
    summarize_rows(&metric_rows(records))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    (mean(v), sample_std(v))
}

pub fn write_replicate_csv<W: Write>(rows: &[MetricRow], mut w: W) -> Result<()> {
    writeln!(w, "{REPLICATE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.sweep_value, r.replicate, r.seed, r.arm, r.metric, r.value
        )?;
    }
    Ok(())
}

pub fn read_replicate_csv<R: BufRead>(r: R) -> Result<Vec<MetricRow>> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == REPLICATE_HEADER => {}
        _ => return Err(Error::Parse(format!("expected header '{REPLICATE_HEADER}'"))),
    }
    let bad = |n: usize| Error::Parse(format!("malformed replicate row {n}"));
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(n + 2));
        }
        out.push(MetricRow {
            sweep_value: f[0].parse().map_err(|_| bad(n + 2))?,
            replicate: f[1].parse().map_err(|_| bad(n + 2))?,
            seed: f[2].parse().map_err(|_| bad(n + 2))?,
            arm: f[3].parse()?,
            metric: f[4].to_string(),
            value: f[5].parse().map_err(|_| bad(n + 2))?,
        });
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut w: W) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.sweep_value, r.arm, r.metric, r.mean, r.std)?;
    }
    Ok(())
}

/// Recompute the summary from the `replicate_*.csv` files of a run directory.
pub fn summary_from_dir(dir: &Path, replicates: usize) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for r in 0..replicates {
        let f = File::open(dir.join(replicate_file_name(r)))?;
        rows.extend(read_replicate_csv(BufReader::new(f))?);
    }
    Ok(summarize_rows(&rows))
}

pub fn replicate_file_name(r: usize) -> String {
    format!("replicate_{r}.csv")
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(v: f64, r: usize, arm: Arm, x: f64) -> ArmRecord {
        ArmRecord {
            sweep_value: v,
            replicate: r,
            seed: r as u64,
            arm,
            metrics: vec![("nll".into(), x), ("ece".into(), 2.0 * x)],
            report: None,
        }
    }

    #[test]
    fn summary_statistics() {
        let recs = vec![
            rec(0.5, 0, Arm::Erm, 1.0),
            rec(0.5, 0, Arm::Mixup, 4.0),
            rec(0.5, 1, Arm::Erm, 3.0),
            rec(0.5, 1, Arm::Mixup, 4.0),
        ];
        let s = summarize(&recs);
        assert_eq!(s.len(), 4);
        assert_eq!((s[0].arm, s[0].metric.as_str()), (Arm::Erm, "nll"));
        assert_eq!(s[0].mean, 2.0);
        assert!((s[0].std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((s[2].mean, s[2].std), (4.0, 0.0));
        let single = summarize(&recs[..1]);
        assert_eq!(single[0].std, 0.0);
    }

    #[test]
    fn replicate_csv_round_trips() {
        let recs = vec![rec(0.1, 0, Arm::ErmTs, 0.123456789012345), rec(0.1, 0, Arm::MixupOptimal, f64::INFINITY)];
        let rows = metric_rows(&recs);
        let mut buf = Vec::new();
        write_replicate_csv(&rows, &mut buf).unwrap();
        let back = read_replicate_csv(&buf[..]).unwrap();
        assert_eq!(back, rows);
        assert!(read_replicate_csv(&b"a,b\n"[..]).is_err());
    }
}
