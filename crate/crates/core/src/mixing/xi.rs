use super::barycentric::SimplexChart;
use super::{MixDistribution, MixingIndexSet, HULL_TOL};
use crate::calibration::Predictor;
use crate::distributions::LabeledDataset;
use crate::error::{Error, Result};

/// What to predict at points no admissible simplex covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncoveredPolicy {
    Error,
    /// Fall back to the uniform distribution over classes.
    Uniform,
}

/// The optimal d-Mixup predictor over an explicit list of admissible tuples.
#[derive(Debug, Clone)]
pub struct MixupOracle {
    charts: Vec<(SimplexChart, Vec<usize>)>,
    k: usize,
    density: f64,
    pub uncovered: UncoveredPolicy,
}

impl MixupOracle {
    pub fn new(data: &LabeledDataset, sets: &[MixingIndexSet], mix: &MixDistribution) -> Result<Self> {
        let d = mix.d();
        let density = mix
            .density(&vec![1.0 / (d + 1) as f64; d + 1])
            .ok_or_else(|| Error::Parameter("mixing distribution has no density".into()))?;
        let mut charts = Vec::with_capacity(sets.len());
        for s in sets {
            if s.d() != d {
                return Err(Error::Parameter(format!(
                    "tuple of dimension {} with a {}-dimensional mixing distribution",
                    s.d(),
                    d
                )));
            }
            let chart = SimplexChart::from_sigma(data, s)?;
            let labels = s.indices.iter().map(|&i| data.label(i)).collect();
            charts.push((chart, labels));
        }
        Ok(Self {
            charts,
            k: data.num_classes(),
            density,
            uncovered: UncoveredPolicy::Error,
        })
    }

    pub fn with_policy(mut self, policy: UncoveredPolicy) -> Self {
        self.uncovered = policy;
        self
    }

    /// `xi_y(z)` for every class `y`.
    pub fn xi_all(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        for (chart, labels) in &self.charts {
            let w = chart.weights(z)?;
            if !w.is_inside(HULL_TOL) {
                continue;
            }
            let scale = self.density / chart.det().abs();
            for (&lam, &y) in w.as_slice().iter().zip(labels) {
                // boundary ties may leave components at -tol
                out[y] += scale * lam.max(0.0);
            }
        }
        Ok(out)
    }

    pub fn optimal_prediction(&self, z: &[f64]) -> Result<Vec<f64>> {
        let xi = self.xi_all(z)?;
        let total: f64 = xi.iter().sum();
        if total > 0.0 {
            Ok(xi.into_iter().map(|v| v / total).collect())
        } else {
            match self.uncovered {
                UncoveredPolicy::Error => Err(Error::Uncovered),
                UncoveredPolicy::Uniform => Ok(vec![1.0 / self.k as f64; self.k]),
            }
        }
    }
}

impl Predictor for MixupOracle {
    fn num_classes(&self) -> usize {
        self.k
    }

    fn log_proba(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter()
            .map(|x| Ok(self.optimal_prediction(x)?.into_iter().map(f64::ln).collect()))
            .collect()
    }
}

/// `xi_y(z)`: density-weighted class-`y` barycentric mass over every tuple in
/// `sets` whose hull contains `z`.
pub fn xi(
    z: &[f64],
    y: usize,
    sets: &[MixingIndexSet],
    mix: &MixDistribution,
    data: &LabeledDataset,
) -> Result<f64> {
    Ok(MixupOracle::new(data, sets, mix)?.xi_all(z)?[y])
}

pub fn optimal_prediction(
    z: &[f64],
    sets: &[MixingIndexSet],
    mix: &MixDistribution,
    data: &LabeledDataset,
) -> Result<Vec<f64>> {
    MixupOracle::new(data, sets, mix)?.optimal_prediction(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::build_mixing_set;

    fn line(points: &[f64], labels: &[usize], k: usize) -> LabeledDataset {
        LabeledDataset::new(
            points.iter().map(|&x| vec![x]).collect(),
            labels.to_vec(),
            k,
            0,
            "t",
        )
        .unwrap()
    }

    #[test]
    fn two_point_segment_is_affine() {
        let data = line(&[0.0, 2.0], &[0, 1], 2);
        let mix = MixDistribution::uniform(1).unwrap();
        let sets = build_mixing_set(&data, 1, 10.0).unwrap();
        for t in [0.1, 0.25, 0.5, 0.9] {
            let p = optimal_prediction(&[2.0 * t], &sets, &mix, &data).unwrap();
            assert!((p[0] - (1.0 - t)).abs() < 1e-12);
            assert!((p[1] - t).abs() < 1e-12);
        }
        let a = xi(&[1.0], 0, &sets, &mix, &data).unwrap();
        let b = xi(&[1.0], 1, &sets, &mix, &data).unwrap();
        assert!((a - b).abs() < 1e-15 && a > 0.0);
    }

    #[test]
    fn single_class_cover_is_one_hot() {
        let data = line(&[0.0, 1.0, 5.0, 6.0], &[2, 2, 0, 1], 3);
        let mix = MixDistribution::uniform(1).unwrap();
        let sets = build_mixing_set(&data, 1, 1.5).unwrap();
        let p = optimal_prediction(&[0.4], &sets, &mix, &data).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
        assert!(xi(&[0.4], 2, &sets, &mix, &data).unwrap() > 0.0);
        assert_eq!(xi(&[0.4], 0, &sets, &mix, &data).unwrap(), 0.0);
    }

    /// Five points on a line, z covered by exactly three segments within the
    /// cap; expected values are worked term by term.
    #[test]
    fn five_point_hand_evaluation() {
        // x: 0.0(a) 0.4(b) 1.0(a) 1.3(b) 3.0(a); cap 1.05; z = 0.7
        let data = line(&[0.0, 0.4, 1.0, 1.3, 3.0], &[0, 1, 0, 1, 0], 2);
        let mix = MixDistribution::uniform(1).unwrap();
        let sets = build_mixing_set(&data, 1, 1.05).unwrap();
        // covering unordered pairs: (0.0,1.0), (0.4,1.0), (0.4,1.3); each twice
        let mut ea = 0.0;
        let mut eb = 0.0;
        for (l, r, yl, yr) in [(0.0, 1.0, 0, 0), (0.4, 1.0, 1, 0), (0.4, 1.3, 1, 1)] {
            let len: f64 = r - l;
            let wl = (r - 0.7) / len;
            let wr = (0.7 - l) / len;
            for (w, y) in [(wl, yl), (wr, yr)] {
                if y == 0 {
                    ea += 2.0 * w / len;
                } else {
                    eb += 2.0 * w / len;
                }
            }
        }
        let xa = xi(&[0.7], 0, &sets, &mix, &data).unwrap();
        let xb = xi(&[0.7], 1, &sets, &mix, &data).unwrap();
        assert!((xa - ea).abs() < 1e-12, "{xa} vs {ea}");
        assert!((xb - eb).abs() < 1e-12, "{xb} vs {eb}");
    }

    #[test]
    fn uncovered_policy() {
        let data = line(&[0.0, 1.0], &[0, 1], 2);
        let mix = MixDistribution::uniform(1).unwrap();
        let sets = build_mixing_set(&data, 1, 2.0).unwrap();
        let o = MixupOracle::new(&data, &sets, &mix).unwrap();
        assert!(matches!(o.optimal_prediction(&[3.0]), Err(Error::Uncovered)));
        let o = o.with_policy(UncoveredPolicy::Uniform);
        assert_eq!(o.optimal_prediction(&[3.0]).unwrap(), vec![0.5, 0.5]);
    }
}
