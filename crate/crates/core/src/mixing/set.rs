use std::io::Write;

use super::MixingIndexSet;
use crate::distributions::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::{distance, dot, norm, sub};

/// Checks the three admissibility clauses for a tuple of points (last one is
/// the anchor): nonzero differences to the anchor, pairwise normalized inner
/// products of those differences at most `1/(2d)`, and every pairwise
/// distance at most `cap`.
pub fn is_admissible(points: &[&[f64]], cap: f64) -> bool {
    let d = points.len() - 1;
    let anchor = points[d];
    let diffs: Vec<Vec<f64>> = points[..d].iter().map(|p| sub(p, anchor)).collect();
    let norms: Vec<f64> = diffs.iter().map(|v| norm(v)).collect();
    if norms.iter().any(|&n| n == 0.0) {
        return false;
    }
    let bound = 1.0 / (2.0 * d as f64);
    for i in 0..d {
        for j in 0..d {
            if i != j && dot(&diffs[i], &diffs[j]) / (norms[i] * norms[j]) > bound {
                return false;
            }
        }
    }
    for i in 0..=d {
        for j in i + 1..=d {
            if distance(points[i], points[j]) > cap {
                return false;
            }
        }
    }
    true
}

/// Every admissible ordered `(d + 1)`-tuple, in lexicographic index order.
///
/// Exhaustive over `N^(d+1)` tuples, so meant for small verification datasets.
pub fn build_mixing_set(
    data: &LabeledDataset,
    d: usize,
    cap: f64,
) -> Result<Vec<MixingIndexSet>> {
    if d == 0 {
        return Err(Error::Parameter("mixing dimension must be at least 1".into()));
    }
    let n = data.len();
    if d + 1 > n {
        return Err(Error::InsufficientData(format!(
            "{} points cannot form a {}-tuple",
            n,
            d + 1
        )));
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; d + 1];
    loop {
        let pts: Vec<&[f64]> = idx.iter().map(|&i| data.point(i)).collect();
        if is_admissible(&pts, cap) {
            out.push(MixingIndexSet {
                indices: idx.clone(),
                diameter_cap: cap,
            });
        }
        // odometer, last position fastest
        let mut pos = d + 1;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Default diameter cap: the 10th percentile (lower order statistic) of all
/// pairwise distances.
pub fn default_cap(data: &LabeledDataset) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "pairwise distances need at least two points".into(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(distance(data.point(i), data.point(j)));
        }
    }
    let rank = ((dists.len() - 1) as f64 * 0.1).floor() as usize;
    let (_, v, _) = dists.select_nth_unstable_by(rank, f64::total_cmp);
    Ok(*v)
}

/// `d,cap,n_sigma` header, then one comma-separated tuple per line.
pub fn write_mixing_set<W: Write>(
    sets: &[MixingIndexSet],
    d: usize,
    cap: f64,
    mut w: W,
) -> Result<()> {
    writeln!(w, "{},{},{}", d, cap, sets.len())?;
    for s in sets {
        let row: Vec<String> = s.indices.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
