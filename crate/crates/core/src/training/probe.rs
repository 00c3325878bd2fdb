use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use super::model::SoftmaxClassifier;
use crate::distributions::LabeledDataset;
use crate::error::{param, Error, Result};
use crate::math::mean;
use crate::rng::{derive, seeded};

/// Per-point logit margins of a model on its training set.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationReport {
    /// `min_{s != y_i} g_{y_i}(x_i) - g_s(x_i)`.
    pub gaps: Vec<f64>,
    /// `max_{r, s != y_i} g_s(x_i) - g_r(x_i)`.
    pub spreads: Vec<f64>,
    /// Fraction of points whose gap exceeds `log k`.
    pub fraction_interpolated: f64,
    pub training_error: f64,
    pub mean_gap: f64,
    pub mean_spread: f64,
    pub mean_max_logit: f64,
    pub mean_second_logit: f64,
    pub k: usize,
}

impl InterpolationReport {
    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn gap_of(logits: &[f64], y: usize) -> f64 {
    let best_other = logits
        .iter()
        .enumerate()
        .filter(|&(s, _)| s != y)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    logits[y] - best_other
}

pub fn check_interpolation(model: &SoftmaxClassifier, data: &LabeledDataset) -> Result<InterpolationReport> {
    if model.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    let k = model.num_classes();
    if k < 2 || k != data.num_classes() {
        return Err(param("model and data disagree on the number of classes"));
    }
    let logits = model.forward_batch(&model.to_matrix(data.points())?);
    let n = data.len();
    let (mut gaps, mut spreads) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut top, mut second) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (row, &y) in logits.outer_iter().zip(data.labels()) {
        let l = row.as_slice().unwrap();
        gaps.push(gap_of(l, y));
        let others = l.iter().enumerate().filter(|&(s, _)| s != y).map(|(_, v)| *v);
        let (lo, hi) = others.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        spreads.push(hi - lo);
        let mut sorted = l.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        top.push(sorted[0]);
        second.push(sorted[1]);
    }
    if gaps.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let log_k = (k as f64).ln();
    let nf = n as f64;
    Ok(InterpolationReport {
        fraction_interpolated: gaps.iter().filter(|g| **g > log_k).count() as f64 / nf,
        training_error: gaps.iter().filter(|g| **g <= 0.0).count() as f64 / nf,
        mean_gap: mean(&gaps),
        mean_spread: mean(&spreads),
        mean_max_logit: mean(&top),
        mean_second_logit: mean(&second),
        gaps,
        spreads,
        k,
    })
}

/// Sphere radii and sample counts for [`logit_gap_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityProbe {
    radii: Vec<f64>,
    samples: usize,
    max_points: Option<usize>,
}

impl RegularityProbe {
    /// Radii must be nonnegative and strictly ascending. Radius 0 evaluates the
    /// training points themselves.
    pub fn new(radii: Vec<f64>, samples: usize) -> Result<Self> {
        if radii.is_empty() {
            return Err(param("probe needs at least one radius"));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(param("radii must be finite, nonnegative and strictly ascending"));
        }
        if samples == 0 {
            return Err(param("samples per sphere must be positive"));
        }
        Ok(Self {
            radii,
            samples,
            max_points: None,
        })
    }

    /// Probe only the first `n` training points.
    pub fn with_max_points(mut self, n: usize) -> Self {
        self.max_points = Some(n);
        self
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn samples(&self) -> usize {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusGap {
    pub radius: f64,
    pub mean_gap: f64,
}

/// Mean correct-class logit gap over points sampled uniformly on spheres
/// around each training point. Point `i` uses the generator `derive(seed, i)`.
pub fn logit_gap_probe(
    model: &SoftmaxClassifier,
    data: &LabeledDataset,
    probe: &RegularityProbe,
    seed: u64,
) -> Result<Vec<RadiusGap>> {
    if model.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    let n = probe.max_points.map_or(data.len(), |m| m.min(data.len()));
    let dim = data.dim();
    let mut per_radius = vec![Vec::with_capacity(n); probe.radii.len()];
    let mut dirs = Array2::<f64>::zeros((probe.samples, dim));
    let mut z = Array2::<f64>::zeros((probe.samples, dim));
    for i in 0..n {
        let mut rng = seeded(derive(seed, i as u64));
        for mut row in dirs.outer_iter_mut() {
            loop {
                row.mapv_inplace(|_| StandardNormal.sample(&mut rng));
                let norm = row.dot(&row).sqrt();
                if norm > 0.0 {
                    row /= norm;
                    break;
                }
            }
        }
        let x = data.point(i);
        let y = data.label(i);
        for (ri, &r) in probe.radii.iter().enumerate() {
            if r == 0.0 {
                let l = model.forward(x)?;
                per_radius[ri].push(gap_of(&l, y));
                continue;
            }
            for ((s, c), v) in z.indexed_iter_mut() {
                *v = x[c] + r * dirs[(s, c)];
            }
            let logits = model.forward_batch(&z);
            let gaps: Vec<f64> = logits
                .outer_iter()
                .map(|row| gap_of(row.as_slice().unwrap(), y))
                .collect();
            per_radius[ri].push(mean(&gaps));
        }
    }
    Ok(probe
        .radii
        .iter()
        .zip(per_radius)
        .map(|(&radius, g)| RadiusGap {
            radius,
            mean_gap: mean(&g),
        })
        .collect())
}
