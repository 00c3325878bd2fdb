use super::temperature::tempered_log_proba;
use super::Predictor;
use crate::distributions::GroundTruth;
use crate::error::{param, Result};
use crate::math::mean;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    /// Monte Carlo mean of `KL(pi(.|X) || prediction(X))`; `+inf` if any
    /// point has zero predicted mass on a class with positive posterior.
    pub value: f64,
    pub n_mc: usize,
    /// Number of points with infinite divergence.
    pub infinite_points: usize,
}

/// Inputs drawn from a ground truth together with their exact posteriors,
/// reusable across predictors and temperatures.
#[derive(Debug, Clone)]
pub struct KlSample {
    points: Vec<Vec<f64>>,
    posteriors: Vec<Vec<f64>>,
}

impl KlSample {
    pub fn draw(truth: &dyn GroundTruth, n_mc: usize, seed: u64) -> Result<Self> {
        if n_mc == 0 {
            return Err(param("Monte Carlo sample size must be at least 1"));
        }
        let data = truth.sample(n_mc, seed)?;
        Self::from_points(truth, data.points().to_vec())
    }

    pub fn from_points(truth: &dyn GroundTruth, points: Vec<Vec<f64>>) -> Result<Self> {
        let posteriors = points
            .iter()
            .map(|x| truth.posterior(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, posteriors })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn posteriors(&self) -> &[Vec<f64>] {
        &self.posteriors
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pointwise `KL(pi || q)` with `0 log 0 = 0`.
    pub fn pointwise(&self, log_proba: &[Vec<f64>], t: f64) -> Vec<f64> {
        self.posteriors
            .iter()
            .zip(log_proba)
            .map(|(pi, lq)| {
                let lq = tempered_log_proba(lq, t);
                pi.iter()
                    .zip(&lq)
                    .filter(|(p, _)| **p > 0.0)
                    .map(|(p, q)| p * (p.ln() - q))
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn kl_of_log_proba(&self, log_proba: &[Vec<f64>], t: f64) -> KlEstimate {
        let terms = self.pointwise(log_proba, t);
        let infinite_points = terms.iter().filter(|v| **v == f64::INFINITY).count();
        KlEstimate {
            value: if infinite_points > 0 { f64::INFINITY } else { mean(&terms) },
            n_mc: terms.len(),
            infinite_points,
        }
    }

    pub fn kl(&self, model: &dyn Predictor, t: Option<f64>) -> Result<KlEstimate> {
        let t = t.unwrap_or(1.0);
        if !(t > 0.0 && t.is_finite()) {
            return Err(param(format!("temperature must be positive, got {t}")));
        }
        let lp = model.log_proba(&self.points)?;
        Ok(self.kl_of_log_proba(&lp, t))
    }
}

/// Monte Carlo estimate of `E_X KL(pi(.|X) || softmax(g(X) / T))` over
/// `n_mc` draws from `truth`. The posterior is always the first argument.
pub fn expected_kl(
    model: &dyn Predictor,
    truth: &dyn GroundTruth,
    n_mc: usize,
    seed: u64,
    t: Option<f64>,
) -> Result<KlEstimate> {
    KlSample::draw(truth, n_mc, seed)?.kl(model, t)
}
