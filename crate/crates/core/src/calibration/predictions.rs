use crate::error::{param, Error, Result};
use crate::math::{argmax, log_softmax, softmax};

/// Predicted distributions with their true labels. When built from logits or
/// log-probabilities the log-space rows are kept, so NLL and temperature
/// scaling do not lose precision to underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    probs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    logits: Option<Vec<Vec<f64>>>,
    k: usize,
}

const SUM_TOL: f64 = 1e-9;

impl PredictionSet {
    pub fn new(probs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        Self::build(probs, labels, None)
    }

    pub fn from_logits(logits: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if logits.iter().flatten().any(|v| !v.is_finite()) {
            return Err(param("logits must be finite"));
        }
        let probs = logits.iter().map(|l| softmax(l)).collect();
        Self::build(probs, labels, Some(logits))
    }

    /// Rows of natural-log probabilities; `-inf` marks a zero probability.
    pub fn from_log_proba(log_probs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if log_probs.iter().flatten().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(param("log-probabilities must not be NaN or +inf"));
        }
        let probs = log_probs
            .iter()
            .map(|l| l.iter().map(|v| v.exp()).collect())
            .collect();
        Self::build(probs, labels, Some(log_probs))
    }

    fn build(probs: Vec<Vec<f64>>, labels: Vec<usize>, logits: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(param("prediction set is empty"));
        }
        if probs.len() != labels.len() {
            return Err(param(format!("{} rows but {} labels", probs.len(), labels.len())));
        }
        let k = probs[0].len();
        if k < 2 {
            return Err(param("need at least two classes"));
        }
        for (i, (p, &y)) in probs.iter().zip(&labels).enumerate() {
            if p.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: p.len(),
                });
            }
            if y >= k {
                return Err(param(format!("row {i}: label {y} outside 0..{k}")));
            }
            if p.iter().any(|v| !(0.0..=1.0 + SUM_TOL).contains(v)) {
                return Err(param(format!("row {i}: probability outside [0, 1]")));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(param(format!("row {i}: probabilities sum to {s}")));
            }
        }
        Ok(Self {
            probs,
            labels,
            logits,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn logits(&self) -> Option<&[Vec<f64>]> {
        self.logits.as_deref()
    }

    /// Top class of row `i`, ties going to the lowest index.
    pub fn top_class(&self, i: usize) -> usize {
        argmax(&self.probs[i])
    }

    /// `(confidence, correct)` per row.
    pub fn confidences(&self) -> Vec<(f64, bool)> {
        (0..self.len())
            .map(|i| {
                let t = self.top_class(i);
                (self.probs[i][t], t == self.labels[i])
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let hits = (0..self.len())
            .filter(|&i| self.top_class(i) == self.labels[i])
            .count();
        hits as f64 / self.len() as f64
    }

    /// `log p_y` of the true label on every row.
    pub fn true_log_probs(&self) -> Vec<f64> {
        match &self.logits {
            Some(l) => l
                .iter()
                .zip(&self.labels)
                .map(|(row, &y)| log_softmax(row)[y])
                .collect(),
            None => self
                .probs
                .iter()
                .zip(&self.labels)
                .map(|(p, &y)| p[y].ln())
                .collect(),
        }
    }

    /// Rows whose true label received probability exactly zero.
    pub fn zero_probability_rows(&self) -> Vec<usize> {
        self.true_log_probs()
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == f64::NEG_INFINITY)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rescale the stored log-space rows by `1/t`.
    pub fn with_temperature(&self, t: f64) -> Result<Self> {
        let logits = self
            .logits
            .as_ref()
            .ok_or_else(|| param("temperature scaling needs logits"))?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(param(format!("temperature must be positive, got {t}")));
        }
        let scaled: Vec<Vec<f64>> = logits
            .iter()
            .map(|l| log_softmax(&l.iter().map(|v| v / t).collect::<Vec<_>>()))
            .collect();
        Self::from_log_proba(scaled, self.labels.clone())
    }
}

/// Mean negative log-likelihood of the true labels. A row with zero
/// probability on its label makes the result `+inf`; see
/// [`PredictionSet::zero_probability_rows`].
pub fn nll(preds: &PredictionSet) -> f64 {
    let lp = preds.true_log_probs();
    if lp.iter().any(|v| *v == f64::NEG_INFINITY) {
        return f64::INFINITY;
    }
    -crate::math::mean(&lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_nll_is_zero() {
        let p = PredictionSet::new(vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]], vec![1, 0]).unwrap();
        assert_eq!(nll(&p), 0.0);
        assert_eq!(p.accuracy(), 1.0);
    }

    #[test]
    fn uniform_nll_is_log_k() {
        let p = PredictionSet::new(vec![vec![0.1; 10]; 7], vec![3; 7]).unwrap();
        assert!((nll(&p) - 10f64.ln()).abs() < 1e-15);
        let q = PredictionSet::from_logits(vec![vec![0.0; 10]; 7], vec![3; 7]).unwrap();
        assert_eq!(nll(&q), 10f64.ln());
    }

    #[test]
    fn zero_mass_is_flagged_not_clamped() {
        let p = PredictionSet::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![1, 0]).unwrap();
        assert_eq!(nll(&p), f64::INFINITY);
        assert_eq!(p.zero_probability_rows(), vec![0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let p = PredictionSet::new(vec![vec![0.4, 0.4, 0.2]], vec![1]).unwrap();
        assert_eq!(p.top_class(0), 0);
        assert_eq!(p.accuracy(), 0.0);
    }

    #[test]
    fn validation() {
        assert!(PredictionSet::new(vec![], vec![]).is_err());
        assert!(PredictionSet::new(vec![vec![0.5, 0.6]], vec![0]).is_err());
        assert!(PredictionSet::new(vec![vec![0.5, 0.5]], vec![2]).is_err());
        assert!(PredictionSet::new(vec![vec![0.5, 0.5]], vec![0, 1]).is_err());
        assert!(PredictionSet::new(vec![vec![1.0 + 5e-10, -5e-10]], vec![0]).is_err());
    }

    #[test]
    fn large_logit_gaps_keep_finite_nll() {
        let p = PredictionSet::from_logits(vec![vec![0.0, 1000.0]], vec![0]).unwrap();
        assert_eq!(nll(&p), 1000.0);
        assert!(p.zero_probability_rows().is_empty());
    }
}
