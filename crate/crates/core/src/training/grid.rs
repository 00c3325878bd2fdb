//! Learned multi-resolution grid encoding for low-dimensional inputs.
//!
//! Each input coordinate is mapped to `[0, 1]` using the training range and
//! looked up in `levels` tables of `base_resolution * 2^l + 1` nodes with
//! `features` values each, linearly interpolating between the two nearest
//! nodes. The encoding is the concatenation over coordinates and levels.
//! Tables start near zero, so nodes that no training point touches stay
//! inert and the prediction there comes from coarser levels.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::rng::LabRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub levels: usize,
    pub base_resolution: usize,
    pub features: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.base_resolution == 0 || self.features == 0 {
            return Err(param("grid levels, resolution and features must be positive"));
        }
        if self.levels > 24 {
            return Err(param("at most 24 grid levels"));
        }
        Ok(())
    }

    pub fn resolution(&self, level: usize) -> usize {
        self.base_resolution << level
    }
}

const INIT_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GridEncoding {
    pub spec: GridSpec,
    pub(crate) lo: Vec<f64>,
    pub(crate) hi: Vec<f64>,
    /// Indexed `coord * levels + level`, each `(resolution + 1) x features`.
    pub(crate) tables: Vec<Array2<f64>>,
}

impl GridEncoding {
    pub(crate) fn new(spec: GridSpec, dim: usize, rng: &mut LabRng) -> Self {
        let mut tables = Vec::with_capacity(dim * spec.levels);
        for _ in 0..dim {
            for l in 0..spec.levels {
                let mut t = Array2::zeros((spec.resolution(l) + 1, spec.features));
                t.mapv_inplace(|_: f64| rng.random_range(-INIT_SCALE..INIT_SCALE));
                tables.push(t);
            }
        }
        Self {
            spec,
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
            tables,
        }
    }

    pub(crate) fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.tables.iter().map(|t| Array2::zeros(t.raw_dim())).collect()
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn output_dim(&self) -> usize {
        self.dim() * self.spec.levels * self.spec.features
    }

    pub(crate) fn set_range(&mut self, coord: usize, lo: f64, hi: f64) {
        self.lo[coord] = lo;
        self.hi[coord] = if hi > lo { hi } else { lo + 1.0 };
    }

    fn cell(&self, coord: usize, level: usize, x: f64) -> (usize, f64) {
        let r = self.spec.resolution(level);
        let u = ((x - self.lo[coord]) / (self.hi[coord] - self.lo[coord])).clamp(0.0, 1.0);
        let p = u * r as f64;
        let i = (p.floor() as usize).min(r - 1);
        (i, p - i as f64)
    }

    pub(crate) fn encode(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let f = self.spec.features;
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        for (mut row, xr) in out.outer_iter_mut().zip(x.outer_iter()) {
            for (c, &xc) in xr.iter().enumerate() {
                for l in 0..self.spec.levels {
                    let t = &self.tables[c * self.spec.levels + l];
                    let (i, w) = self.cell(c, l, xc);
                    let base = (c * self.spec.levels + l) * f;
                    for j in 0..f {
                        row[base + j] = t[(i, j)] * (1.0 - w) + t[(i + 1, j)] * w;
                    }
                }
            }
        }
        out
    }

    /// Scatter `d loss / d encoding` into table gradients.
    pub(crate) fn backward(&self, x: ArrayView2<f64>, d_enc: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let f = self.spec.features;
        let mut grads = self.zeros_like();
        for (xr, dr) in x.outer_iter().zip(d_enc.outer_iter()) {
            for (c, &xc) in xr.iter().enumerate() {
                for l in 0..self.spec.levels {
                    let (i, w) = self.cell(c, l, xc);
                    let g = &mut grads[c * self.spec.levels + l];
                    let base = (c * self.spec.levels + l) * f;
                    for j in 0..f {
                        g[(i, j)] += dr[base + j] * (1.0 - w);
                        g[(i + 1, j)] += dr[base + j] * w;
                    }
                }
            }
        }
        grads
    }
}
