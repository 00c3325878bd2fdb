use super::HULL_TOL;
use crate::calibration::Predictor;
use crate::distributions::LabeledDataset;
use crate::error::{Error, Result};

/// Optimal 1-Mixup predictor on the real line.
///
/// Equivalent to [`super::MixupOracle`] over the full mixing set at `d = 1`
/// with uniform mixing weights, but works from sorted coordinates: only
/// points within `cap` of `z` are visited, so it scales to thousands of
/// points.
#[derive(Debug, Clone)]
pub struct LineMixupPredictor {
    xs: Vec<f64>,
    ys: Vec<usize>,
    k: usize,
    cap: f64,
}

impl LineMixupPredictor {
    pub fn new(data: &LabeledDataset, cap: f64) -> Result<Self> {
        if data.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: data.dim(),
            });
        }
        if !(cap > 0.0) {
            return Err(Error::Parameter(format!("cap {cap} must be positive")));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.point(a)[0].total_cmp(&data.point(b)[0]).then(a.cmp(&b)));
        Ok(Self {
            xs: order.iter().map(|&i| data.point(i)[0]).collect(),
            ys: order.iter().map(|&i| data.label(i)).collect(),
            k: data.num_classes(),
            cap,
        })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn xi_all(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        let slack = HULL_TOL * self.cap;
        let lo = self.xs.partition_point(|&x| x < z - self.cap - slack);
        let mid_hi = self.xs.partition_point(|&x| x <= z + slack);
        let hi = self.xs.partition_point(|&x| x <= z + self.cap + slack);
        for i in lo..mid_hi {
            let xl = self.xs[i];
            let start = (i + 1).max(self.xs.partition_point(|&x| x < z - slack));
            for j in start..hi {
                let xr = self.xs[j];
                let len = xr - xl;
                if len > self.cap {
                    break;
                }
                if len == 0.0 {
                    continue;
                }
                let wl = (xr - z) / len;
                let wr = (z - xl) / len;
                if wl < -HULL_TOL || wr < -HULL_TOL {
                    continue;
                }
                // both orderings of the pair are admissible tuples; |det L| = len, f = 1
                let scale = 2.0 / len;
                out[self.ys[i]] += scale * wl.max(0.0);
                out[self.ys[j]] += scale * wr.max(0.0);
            }
        }
        out
    }

    /// Normalized `xi`; `None` when no admissible segment covers `z`.
    pub fn prediction(&self, z: f64) -> Option<Vec<f64>> {
        let xi = self.xi_all(z);
        let total: f64 = xi.iter().sum();
        (total > 0.0).then(|| xi.into_iter().map(|v| v / total).collect())
    }
}

impl Predictor for LineMixupPredictor {
    fn num_classes(&self) -> usize {
        self.k
    }

    /// Uncovered points get the uniform distribution.
    fn log_proba(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter()
            .map(|x| {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: x.len(),
                    });
                }
                let p = self
                    .prediction(x[0])
                    .unwrap_or_else(|| vec![1.0 / self.k as f64; self.k]);
                Ok(p.into_iter().map(f64::ln).collect())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::{build_mixing_set, MixDistribution, MixupOracle};
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn agrees_with_exhaustive_oracle() {
        let mut rng = seeded(5);
        for trial in 0..20 {
            let n = 6 + trial % 20;
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>() * 3.0]).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let data = LabeledDataset::new(pts, labels, 3, 0, "t").unwrap();
            let cap = 0.4 + rng.random::<f64>();
            let sets = build_mixing_set(&data, 1, cap).unwrap();
            let oracle = MixupOracle::new(&data, &sets, &MixDistribution::uniform(1).unwrap())
                .unwrap();
            let fast = LineMixupPredictor::new(&data, cap).unwrap();
            for _ in 0..50 {
                let z = rng.random::<f64>() * 3.4 - 0.2;
                let a = oracle.xi_all(&[z]).unwrap();
                let b = fast.xi_all(z);
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()), "{a:?} vs {b:?} at {z}");
                }
            }
        }
    }

    #[test]
    fn rejects_multidimensional_data() {
        let data = LabeledDataset::new(vec![vec![0.0, 1.0]], vec![0], 1, 0, "t").unwrap();
        assert!(LineMixupPredictor::new(&data, 1.0).is_err());
    }
}
