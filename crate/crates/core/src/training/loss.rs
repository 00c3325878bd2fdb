//! Mixing objectives as soft-label cross-entropy on a constructed batch.
//!
//! Each objective turns a set of dataset indices into inputs and soft targets:
//! ERM uses the points with one-hot targets, Mixup mixes every point with one
//! random partner from the batch, d-Mixup with `d` random partners. The loss
//! is then `-(1/B) sum_b sum_y target[b, y] log softmax(g(input_b))_y`.

use ndarray::Array2;
use rand::Rng;

use super::model::{Gradient, SoftmaxClassifier};
use crate::distributions::LabeledDataset;
use crate::error::{param, Result};
use crate::math::{log_softmax, mean};
use crate::mixing::{mix_points, MixDistribution};
use crate::rng::{seeded, LabRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftBatch {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl SoftBatch {
    fn with_capacity(b: usize, dim: usize, k: usize) -> Self {
        Self {
            inputs: Array2::zeros((b, dim)),
            targets: Array2::zeros((b, k)),
        }
    }

    fn set_row(&mut self, r: usize, z: &[f64], soft: &[f64]) {
        for (c, v) in z.iter().enumerate() {
            self.inputs[(r, c)] = *v;
        }
        for (c, v) in soft.iter().enumerate() {
            self.targets[(r, c)] = *v;
        }
    }
}

fn check_nonempty(idx: &[usize]) -> Result<()> {
    if idx.is_empty() {
        return Err(param("batch must not be empty"));
    }
    Ok(())
}

pub fn erm_batch(data: &LabeledDataset, idx: &[usize]) -> Result<SoftBatch> {
    check_nonempty(idx)?;
    let mut b = SoftBatch::with_capacity(idx.len(), data.dim(), data.num_classes());
    for (r, &i) in idx.iter().enumerate() {
        for (c, v) in data.point(i).iter().enumerate() {
            b.inputs[(r, c)] = *v;
        }
        b.targets[(r, data.label(i))] = 1.0;
    }
    Ok(b)
}

/// Pairs `(i, j)` with `j` drawn from the batch and
/// `z = lam x_i + (1 - lam) x_j`, target `lam e_{y_i} + (1 - lam) e_{y_j}`.
pub fn mixup_batch(
    data: &LabeledDataset,
    idx: &[usize],
    mix: &MixDistribution,
    rng: &mut LabRng,
) -> Result<SoftBatch> {
    if idx.len() < 2 {
        return Err(param("mixup needs a batch of at least two points"));
    }
    if mix.d() != 1 {
        return Err(param("mixup mixes pairs; use a 1-dimensional mixing distribution"));
    }
    let mut b = SoftBatch::with_capacity(idx.len(), data.dim(), data.num_classes());
    let mut z = vec![0.0; data.dim()];
    for (r, &i) in idx.iter().enumerate() {
        let j = idx[rng.random_range(0..idx.len())];
        let lam = match mix {
            MixDistribution::Uniform { .. } => rng.random::<f64>(),
            MixDistribution::Fixed(w) => w.as_slice()[0],
        };
        for ((zc, a), bb) in z.iter_mut().zip(data.point(i)).zip(data.point(j)) {
            *zc = lam * a + (1.0 - lam) * bb;
        }
        let mut soft = vec![0.0; data.num_classes()];
        soft[data.label(i)] += lam;
        soft[data.label(j)] += 1.0 - lam;
        b.set_row(r, &z, &soft);
    }
    Ok(b)
}

/// Tuples `(i, j_1, ..., j_d)` with partners drawn from the batch with
/// replacement and weights from `mix`.
pub fn dmixup_batch(
    data: &LabeledDataset,
    idx: &[usize],
    d: usize,
    mix: &MixDistribution,
    rng: &mut LabRng,
) -> Result<SoftBatch> {
    if d == 0 || mix.d() != d {
        return Err(param(format!(
            "mixing distribution of dimension {} for d = {d}",
            mix.d()
        )));
    }
    if idx.len() < d + 1 {
        return Err(param(format!("d-mixup with d = {d} needs at least {} points", d + 1)));
    }
    let mut b = SoftBatch::with_capacity(idx.len(), data.dim(), data.num_classes());
    let mut sigma = vec![0usize; d + 1];
    for (r, &i) in idx.iter().enumerate() {
        sigma[0] = i;
        for s in sigma.iter_mut().skip(1) {
            *s = idx[rng.random_range(0..idx.len())];
        }
        let lam = mix.sample(rng);
        let (z, soft) = mix_points(data, &sigma, lam.as_slice());
        b.set_row(r, &z, &soft);
    }
    Ok(b)
}

pub fn soft_cross_entropy(model: &SoftmaxClassifier, batch: &SoftBatch) -> f64 {
    let logits = model.forward_batch(&batch.inputs);
    let terms: Vec<f64> = logits
        .outer_iter()
        .zip(batch.targets.outer_iter())
        .map(|(row, t)| row_loss(&log_softmax(row.as_slice().unwrap()), t.as_slice().unwrap()))
        .collect();
    mean(&terms)
}

fn row_loss(log_p: &[f64], target: &[f64]) -> f64 {
    log_p
        .iter()
        .zip(target)
        .filter(|(_, w)| **w != 0.0)
        .map(|(l, w)| -w * l)
        .sum()
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_gradient(model: &SoftmaxClassifier, batch: &SoftBatch) -> (f64, Gradient) {
    let acts = model.forward_all(&batch.inputs);
    let logits = acts.last().unwrap();
    let n = logits.nrows() as f64;
    let mut terms = Vec::with_capacity(logits.nrows());
    let mut dlogits = Array2::zeros(logits.raw_dim());
    for (r, (row, t)) in logits.outer_iter().zip(batch.targets.outer_iter()).enumerate() {
        let ls = log_softmax(row.as_slice().unwrap());
        terms.push(row_loss(&ls, t.as_slice().unwrap()));
        let tsum: f64 = t.sum();
        for (c, (l, w)) in ls.iter().zip(t.iter()).enumerate() {
            dlogits[(r, c)] = (tsum * l.exp() - w) / n;
        }
    }
    let grad = model.backward(&batch.inputs, &acts, dlogits);
    (mean(&terms), grad)
}

/// Mean negative log-likelihood of the true labels.
pub fn erm_loss(model: &SoftmaxClassifier, data: &LabeledDataset, idx: &[usize]) -> Result<f64> {
    Ok(soft_cross_entropy(model, &erm_batch(data, idx)?))
}

/// Monte Carlo estimate of the Mixup cross-entropy with one partner and one
/// weight draw per batch element.
pub fn mixup_loss(
    model: &SoftmaxClassifier,
    data: &LabeledDataset,
    idx: &[usize],
    mix: &MixDistribution,
    seed: u64,
) -> Result<f64> {
    let mut rng = seeded(seed);
    Ok(soft_cross_entropy(model, &mixup_batch(data, idx, mix, &mut rng)?))
}

pub fn dmixup_loss(
    model: &SoftmaxClassifier,
    data: &LabeledDataset,
    idx: &[usize],
    d: usize,
    mix: &MixDistribution,
    seed: u64,
) -> Result<f64> {
    let mut rng = seeded(seed);
    Ok(soft_cross_entropy(model, &dmixup_batch(data, idx, d, mix, &mut rng)?))
}
