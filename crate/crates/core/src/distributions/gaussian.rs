use rand::Rng;
use rand_distr::StandardNormal;

use super::GroundTruth;
use crate::error::{param, Error, Result};
use crate::math::{dot, norm};
use crate::rng::LabRng;

/// Two equally likely classes: class 0 ~ N(0, I), class 1 ~ N(mu, I).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPairSpec {
    mu: Vec<f64>,
}

impl GaussianPairSpec {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(param("dimension must be at least 1"));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(param("mean vector must be finite"));
        }
        Ok(Self { mu })
    }

    /// `mu = scale * (1, ..., 1)`.
    pub fn isotropic(dim: usize, scale: f64) -> Result<Self> {
        Self::new(vec![scale; dim])
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Log-odds of class 1: `mu . x - |mu|^2 / 2`.
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        dot(&self.mu, x) - 0.5 * norm(&self.mu).powi(2)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl GroundTruth for GaussianPairSpec {
    fn num_classes(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn draw(&self, rng: &mut LabRng) -> (Vec<f64>, usize) {
        let y = rng.random_range(0..2usize);
        let x = self
            .mu
            .iter()
            .map(|m| {
                let z: f64 = rng.sample(StandardNormal);
                if y == 1 {
                    z + m
                } else {
                    z
                }
            })
            .collect();
        (x, y)
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mu.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mu.len(),
                got: x.len(),
            });
        }
        let t = self.log_odds(x);
        Ok(vec![sigmoid(-t), sigmoid(t)])
    }

    fn describe(&self) -> String {
        let uniform = self.mu.iter().all(|m| *m == self.mu[0]);
        if uniform {
            format!("gaussian(dim={}, mu={}*1)", self.mu.len(), self.mu[0])
        } else {
            format!("gaussian(dim={}, |mu|={})", self.mu.len(), norm(&self.mu))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_and_origin() {
        let s = GaussianPairSpec::isotropic(3, 0.4).unwrap();
        let mid: Vec<f64> = s.mu().iter().map(|m| m / 2.0).collect();
        let p = s.posterior(&mid).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let p0 = s.posterior(&[0.0; 3]).unwrap();
        let n2 = 3.0 * 0.16;
        assert!((p0[1] - 1.0 / (1.0 + (n2 / 2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn zero_mean_is_uninformative() {
        let s = GaussianPairSpec::isotropic(5, 0.0).unwrap();
        let d = s.sample(100, 3).unwrap();
        for x in d.points() {
            assert_eq!(s.posterior(x).unwrap(), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn rejects_empty_and_mismatch() {
        assert!(GaussianPairSpec::new(vec![]).is_err());
        let s = GaussianPairSpec::isotropic(2, 1.0).unwrap();
        assert!(s.posterior(&[1.0]).is_err());
    }
}
