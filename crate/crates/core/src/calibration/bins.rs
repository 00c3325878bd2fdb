use std::io::Write;

use serde::Serialize;

use super::predictions::PredictionSet;
use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BinMode {
    /// Equal-width bins partitioning `[0, 1]`.
    Uniform,
    /// Equal-count bins over rows sorted by `(confidence, row index)`.
    Adaptive,
}

/// One confidence bin. Empty bins carry NaN for both averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_conf: f64,
    pub accuracy: f64,
}

impl Bin {
    fn from_rows(lo: f64, hi: f64, rows: &[(f64, bool)]) -> Self {
        let count = rows.len();
        let (mean_conf, accuracy) = if count == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let c = rows.iter().map(|r| r.0).sum::<f64>() / count as f64;
            let a = rows.iter().filter(|r| r.1).count() as f64 / count as f64;
            (c, a)
        };
        Self {
            lo,
            hi,
            count,
            mean_conf,
            accuracy,
        }
    }

    pub fn gap(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.accuracy - self.mean_conf).abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinTable {
    pub mode: BinMode,
    pub bins: Vec<Bin>,
}

impl BinTable {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// `sum_b (count_b / N) |acc_b - conf_b|`.
    pub fn calibration_error(&self) -> f64 {
        let n = self.total() as f64;
        self.bins.iter().map(|b| b.count as f64 / n * b.gap()).sum()
    }

    /// CSV with header `lo,hi,count,conf,acc`; empty bins print `NA`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lo,hi,count,conf,acc")?;
        let f = |v: f64| if v.is_nan() { "NA".to_string() } else { v.to_string() };
        for b in &self.bins {
            writeln!(w, "{},{},{},{},{}", b.lo, b.hi, b.count, f(b.mean_conf), f(b.accuracy))?;
        }
        Ok(())
    }
}

fn check_bins(n_bins: usize) -> Result<()> {
    if n_bins == 0 {
        return Err(param("need at least one bin"));
    }
    Ok(())
}

fn uniform_index(c: f64, n_bins: usize) -> usize {
    ((c * n_bins as f64) as usize).min(n_bins - 1)
}

fn uniform_table(rows: &[(f64, bool)], n_bins: usize) -> BinTable {
    let mut grouped = vec![Vec::new(); n_bins];
    for &r in rows {
        grouped[uniform_index(r.0, n_bins)].push(r);
    }
    let w = 1.0 / n_bins as f64;
    BinTable {
        mode: BinMode::Uniform,
        bins: grouped
            .iter()
            .enumerate()
            .map(|(b, g)| Bin::from_rows(b as f64 * w, (b + 1) as f64 * w, g))
            .collect(),
    }
}

fn adaptive_table(rows: &[(f64, bool)], n_bins: usize) -> BinTable {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].0.total_cmp(&rows[b].0).then(a.cmp(&b)));
    let base = rows.len() / n_bins;
    let extra = rows.len() % n_bins;
    let mut bins = Vec::with_capacity(n_bins);
    let mut start = 0;
    for b in 0..n_bins {
        let len = base + usize::from(b < extra);
        let group: Vec<(f64, bool)> = order[start..start + len].iter().map(|&i| rows[i]).collect();
        let lo = group.first().map_or(f64::NAN, |r| r.0);
        let hi = group.last().map_or(f64::NAN, |r| r.0);
        bins.push(Bin::from_rows(lo, hi, &group));
        start += len;
    }
    BinTable {
        mode: BinMode::Adaptive,
        bins,
    }
}

/// Top-class expected calibration error over `n_bins` equal-width bins.
/// Confidence 1 falls in the last bin.
pub fn ece(preds: &PredictionSet, n_bins: usize) -> Result<(f64, BinTable)> {
    check_bins(n_bins)?;
    let t = uniform_table(&preds.confidences(), n_bins);
    Ok((t.calibration_error(), t))
}

/// Adaptive calibration error: like [`ece`] but over equal-count bins. The
/// first `N mod n_bins` bins hold one extra row.
pub fn ace(preds: &PredictionSet, n_bins: usize) -> Result<(f64, BinTable)> {
    check_bins(n_bins)?;
    if preds.len() < n_bins {
        return Err(param(format!(
            "adaptive binning needs at least {n_bins} rows, got {}",
            preds.len()
        )));
    }
    let t = adaptive_table(&preds.confidences(), n_bins);
    Ok((t.calibration_error(), t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Reliability-diagram data plus a confidence histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reliability {
    pub table: BinTable,
    pub histogram: Vec<HistogramBin>,
}

impl Reliability {
    /// CSV with header `bin_lo,bin_hi,count`.
    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for h in &self.histogram {
            writeln!(w, "{},{},{}", h.lo, h.hi, h.count)?;
        }
        Ok(())
    }
}

/// Per-bin accuracy and confidence in the requested mode, and a histogram over
/// `n_bins` equal-width bins. For two classes the histogram is of the
/// class-1 probability, which shows mass near both 0 and 1; otherwise it is of
/// the top-class confidence.
pub fn reliability_export(preds: &PredictionSet, n_bins: usize, mode: BinMode) -> Result<Reliability> {
    let table = match mode {
        BinMode::Uniform => ece(preds, n_bins)?.1,
        BinMode::Adaptive => ace(preds, n_bins)?.1,
    };
    let values: Vec<f64> = if preds.num_classes() == 2 {
        preds.probs().iter().map(|p| p[1]).collect()
    } else {
        preds.confidences().iter().map(|c| c.0).collect()
    };
    let mut counts = vec![0usize; n_bins];
    for v in values {
        counts[uniform_index(v, n_bins)] += 1;
    }
    let w = 1.0 / n_bins as f64;
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            lo: b as f64 * w,
            hi: (b + 1) as f64 * w,
            count,
        })
        .collect();
    Ok(Reliability { table, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(conf: f64, correct: usize, n: usize) -> PredictionSet {
        let probs = vec![vec![conf, 1.0 - conf]; n];
        let labels = (0..n).map(|i| usize::from(i >= correct)).collect();
        PredictionSet::new(probs, labels).unwrap()
    }

    #[test]
    fn perfect_confident_predictions() {
        let p = rows(1.0, 20, 20);
        assert_eq!(ece(&p, 15).unwrap().0, 0.0);
        assert_eq!(ace(&p, 15).unwrap().0, 0.0);
        let (_, t) = ece(&p, 15).unwrap();
        assert_eq!(t.bins[14].count, 20);
    }

    #[test]
    fn single_bin_arithmetic() {
        let p = rows(0.8, 6, 10);
        assert!((ece(&p, 15).unwrap().0 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_ace() {
        // alternate hits and misses so every two-row bin has accuracy 1/2
        let labels = (0..30).map(|i| i % 2).collect();
        let p = PredictionSet::new(vec![vec![0.7, 0.3]; 30], labels).unwrap();
        assert!((ace(&p, 15).unwrap().0 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ace_counts_differ_by_at_most_one() {
        let probs: Vec<Vec<f64>> = (0..37).map(|i| vec![0.5 + i as f64 / 100.0, 0.5 - i as f64 / 100.0]).collect();
        let p = PredictionSet::new(probs, vec![0; 37]).unwrap();
        let (_, t) = ace(&p, 15).unwrap();
        let counts: Vec<usize> = t.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts.iter().sum::<usize>(), 37);
        assert_eq!(&counts[..7], &[3; 7]);
        assert_eq!(&counts[7..], &[2; 8]);
        assert!(ace(&rows(0.9, 1, 3), 15).is_err());
    }

    #[test]
    fn empty_bins_use_sentinel() {
        let p = rows(0.9, 5, 5);
        let r = reliability_export(&p, 10, BinMode::Uniform).unwrap();
        assert_eq!(r.table.bins[0].count, 0);
        let mut buf = Vec::new();
        r.table.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("lo,hi,count,conf,acc\n0,0.1,0,NA,NA\n"));
    }

    #[test]
    fn bimodal_histogram() {
        let probs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let p = PredictionSet::new(probs, vec![0, 1, 0]).unwrap();
        let r = reliability_export(&p, 15, BinMode::Uniform).unwrap();
        let counts: Vec<usize> = r.histogram.iter().map(|h| h.count).collect();
        assert_eq!(counts[0], 2);
        assert_eq!(counts[14], 1);
        assert_eq!(counts[1..14].iter().sum::<usize>(), 0);
    }
}
