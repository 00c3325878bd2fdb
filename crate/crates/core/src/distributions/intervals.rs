use rand::Rng;

use super::GroundTruth;
use crate::error::{param, Error, Result};
use crate::rng::LabRng;

/// Overlapping unit intervals on the real line.
///
/// Classes come in consecutive pairs `(2p, 2p + 1)`. Pair `p` starts at
/// `p * k`; the first class of the pair is supported on `[p k, p k + 1]`
/// and the second on `[p k + alpha, p k + alpha + 1]`, so the two overlap on
/// an interval of width `1 - alpha`. The class prior is uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSpec {
    k: usize,
    alpha: f64,
}

impl IntervalSpec {
    pub fn new(k: usize, alpha: f64) -> Result<Self> {
        if k < 2 {
            return Err(param(format!("class count k = {k} must be at least 2")));
        }
        if k % 2 != 0 {
            return Err(param(format!(
                "class count k = {k} must be even (classes overlap in pairs)"
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(param(format!("alpha = {alpha} must lie in [0, 1]")));
        }
        Ok(Self { k, alpha })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Left end of the support of class `y` (zero-based).
    pub fn offset(&self, y: usize) -> f64 {
        (y / 2) as f64 * self.k as f64 + self.alpha * (y % 2) as f64
    }

    pub fn support(&self, y: usize) -> (f64, f64) {
        let b = self.offset(y);
        (b, b + 1.0)
    }

    /// Overlap between class `y` and its partner, given for the first class
    /// of each pair.
    pub fn overlap_region(&self, y: usize) -> Option<(f64, f64)> {
        if y % 2 == 0 && y + 1 < self.k {
            let b = self.offset(y);
            Some((b + self.alpha, b + 1.0))
        } else {
            None
        }
    }

    /// True when `x` lies in the support of two classes.
    pub fn in_overlap(&self, x: f64) -> bool {
        (0..self.k)
            .step_by(2)
            .filter_map(|y| self.overlap_region(y))
            .any(|(lo, hi)| lo <= x && x <= hi)
    }
}

impl GroundTruth for IntervalSpec {
    fn num_classes(&self) -> usize {
        self.k
    }

    fn dim(&self) -> usize {
        1
    }

    fn draw(&self, rng: &mut LabRng) -> (Vec<f64>, usize) {
        let y = rng.random_range(0..self.k);
        let u: f64 = rng.random();
        (vec![self.offset(y) + u], y)
    }

    /// One-hot outside the overlaps, `(1/2, 1/2)` on the two classes sharing an
    /// overlap. Class densities are all 1 on their supports and the prior is
    /// uniform, so the posterior is uniform over the classes covering `x`.
    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: x.len(),
            });
        }
        let x = x[0];
        let covering: Vec<usize> = (0..self.k)
            .filter(|&y| {
                let (lo, hi) = self.support(y);
                lo <= x && x <= hi
            })
            .collect();
        if covering.is_empty() {
            return Err(Error::OutOfSupport(x));
        }
        let mut p = vec![0.0; self.k];
        let w = 1.0 / covering.len() as f64;
        for y in covering {
            p[y] = w;
        }
        Ok(p)
    }

    fn describe(&self) -> String {
        format!("intervals(k={}, alpha={})", self.k, self.alpha)
    }
}
