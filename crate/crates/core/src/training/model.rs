use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::grid::{GridEncoding, GridSpec};
use crate::calibration::Predictor;
use crate::distributions::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::log_softmax;
use crate::rng::seeded;

/// Anything that maps inputs to `k` real logits.
pub trait LogitModel {
    fn num_classes(&self) -> usize;
    fn logits(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

/// Affine layer `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }
}

/// Gradients shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Grid-table gradients; empty without an encoding.
    pub grid: Vec<Array2<f64>>,
    pub layers: Vec<Dense>,
}

impl Gradient {
    /// Same order as [`SoftmaxClassifier::params_flat`].
    pub fn flatten(&self) -> Vec<f64> {
        let grid = self.grid.iter().flat_map(|t| t.iter().copied());
        let layers = self
            .layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied());
        grid.chain(layers).collect()
    }
}

/// MLP with rectifier hidden layers and a linear output layer producing
/// logits. Inputs are either shifted and scaled by fixed per-feature
/// constants, or passed through a learned [`GridEncoding`], before the first
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    pub(crate) input_shift: Array1<f64>,
    pub(crate) input_scale: Array1<f64>,
    pub(crate) grid: Option<GridEncoding>,
    pub(crate) layers: Vec<Dense>,
}

impl SoftmaxClassifier {
    /// Weights and biases drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(input_dim: usize, hidden: &[usize], k: usize, seed: u64) -> Self {
        Self::build(input_dim, hidden, k, None, seed).expect("no grid to validate")
    }

    /// Like [`SoftmaxClassifier::new`] with an optional grid encoding, whose
    /// tables are drawn first from the same generator.
    pub fn build(input_dim: usize, hidden: &[usize], k: usize, grid: Option<GridSpec>, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let grid = match grid {
            Some(spec) => {
                spec.validate()?;
                Some(GridEncoding::new(spec, input_dim, &mut rng))
            }
            None => None,
        };
        let mut m = Self::zeros(input_dim, hidden, k);
        if let Some(g) = grid {
            m.layers[0] = Dense::zeros(g.output_dim(), m.layers[0].fan_out());
            m.grid = Some(g);
        }
        for layer in &mut m.layers {
            let bound = 1.0 / (layer.fan_in() as f64).sqrt();
            layer
                .weight
                .mapv_inplace(|_| rng.random_range(-bound..bound));
            layer.bias.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(m)
    }

    pub fn zeros(input_dim: usize, hidden: &[usize], k: usize) -> Self {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(k);
        Self {
            input_shift: Array1::zeros(input_dim),
            input_scale: Array1::ones(input_dim),
            grid: None,
            layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Standardize each input feature to zero mean and unit variance on
    /// `data`, and stretch the grid encoding, if any, over the data range.
    pub fn fit_input_scaling(&mut self, data: &LabeledDataset) {
        let n = data.len() as f64;
        for c in 0..self.input_dim() {
            let col = data.points().iter().map(|p| p[c]);
            let mean = col.clone().sum::<f64>() / n;
            let var = col.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            self.input_shift[c] = mean;
            self.input_scale[c] = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
            if let Some(g) = &mut self.grid {
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                g.set_range(c, lo, hi);
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_shift.len()
    }

    pub fn grid(&self) -> Option<&GridEncoding> {
        self.grid.as_ref()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map(Dense::fan_out).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        let grid: usize = self.grid_tables().iter().map(|t| t.len()).sum();
        grid + self
            .layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum::<usize>()
    }

    fn grid_tables(&self) -> &[Array2<f64>] {
        self.grid.as_ref().map_or(&[], |g| &g.tables)
    }

    /// Grid tables (if any) then each layer's weight and bias, row-major.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(|v| out.push(v));
        out
    }

    fn visit_params(&self, mut f: impl FnMut(f64)) {
        for t in self.grid_tables() {
            t.iter().for_each(|v| f(*v));
        }
        for l in &self.layers {
            l.weight.iter().chain(l.bias.iter()).for_each(|v| f(*v));
        }
    }

    /// Every parameter in [`SoftmaxClassifier::params_flat`] order.
    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        let grid = self
            .grid
            .iter_mut()
            .flat_map(|g| g.tables.iter_mut().flat_map(|t| t.iter_mut()));
        let layers = self
            .layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()));
        grid.chain(layers)
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        for (dst, src) in self.params_mut().zip(p) {
            *dst = *src;
        }
    }

    pub(crate) fn to_matrix(&self, xs: &[Vec<f64>]) -> Result<Array2<f64>> {
        let dim = self.input_dim();
        let mut m = Array2::zeros((xs.len(), dim));
        for (r, x) in xs.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            for (c, v) in x.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        Ok(m)
    }

    /// Activations of every layer: `acts[0]` is the encoded input, the last
    /// entry holds the logits.
    pub(crate) fn forward_all(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        match &self.grid {
            Some(g) => acts.push(g.encode(x.view())),
            None => acts.push((x - &self.input_shift) * &self.input_scale),
        }
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut h = acts[i].dot(&l.weight) + &l.bias;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(h);
        }
        acts
    }

    /// Which hidden units are active (pre-activation above zero) for each
    /// row of `x`. The logits are smooth in the parameters wherever this
    /// pattern stays fixed.
    pub fn relu_pattern(&self, x: &Array2<f64>) -> Vec<bool> {
        let acts = self.forward_all(x);
        acts[1..acts.len() - 1]
            .iter()
            .flat_map(|a| a.iter().map(|v| *v > 0.0).collect::<Vec<_>>())
            .collect()
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_all(x).pop().unwrap()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.to_matrix(std::slice::from_ref(&x.to_vec()))?;
        Ok(self.forward_batch(&m).row(0).to_vec())
    }

    /// Backpropagate `d loss / d logits` through cached activations of the
    /// raw input `x`.
    pub(crate) fn backward(&self, x: &Array2<f64>, acts: &[Array2<f64>], dlogits: Array2<f64>) -> Gradient {
        let mut delta = dlogits;
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut grid = Vec::new();
        for i in (0..self.layers.len()).rev() {
            let input = &acts[i];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i == 0 {
                if let Some(g) = &self.grid {
                    let d_enc = delta.dot(&self.layers[0].weight.t());
                    grid = g.backward(x.view(), d_enc.view());
                }
            } else {
                let mut prev = delta.dot(&self.layers[i].weight.t());
                prev.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
            grads.push(Dense {
                weight: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Gradient {
            grid,
            layers: grads,
        }
    }
}

impl LogitModel for SoftmaxClassifier {
    fn num_classes(&self) -> usize {
        SoftmaxClassifier::num_classes(self)
    }

    fn logits(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let out = self.forward_batch(&self.to_matrix(xs)?);
        Ok(out.outer_iter().map(|r| r.to_vec()).collect())
    }
}

impl Predictor for SoftmaxClassifier {
    fn num_classes(&self) -> usize {
        SoftmaxClassifier::num_classes(self)
    }

    fn log_proba(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.logits(xs)?.iter().map(|l| log_softmax(l)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::softmax;

    #[test]
    fn zero_model_is_uniform() {
        let m = SoftmaxClassifier::zeros(3, &[4, 4], 5);
        let p = softmax(&m.forward(&[1.0, -2.0, 0.5]).unwrap());
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn output_bias_shift_leaves_softmax_unchanged() {
        let mut m = SoftmaxClassifier::new(2, &[8], 3, 1);
        let x = [0.3, -1.2];
        let p0 = softmax(&m.forward(&x).unwrap());
        m.layers.last_mut().unwrap().bias += 37.5;
        let p1 = softmax(&m.forward(&x).unwrap());
        for (a, b) in p0.iter().zip(&p1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = SoftmaxClassifier::new(4, &[16, 16], 6, 9);
        let mut rng = seeded(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let s: f64 = softmax(&m.forward(&x).unwrap()).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = SoftmaxClassifier::new(2, &[3], 2, 0);
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn flat_params_round_trip() {
        let mut m = SoftmaxClassifier::new(2, &[3], 2, 0);
        let p = m.params_flat();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 * 2 + 2);
        let q: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        m.set_params_flat(&q);
        assert_eq!(m.params_flat(), q);
    }
}
