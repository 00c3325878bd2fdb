//! Mixing sets, barycentric reparameterization and the closed-form optimal
//! predictor for the d-Mixup objective.
//!
//! For a tuple `sigma` of `d + 1` dataset indices, the difference matrix
//! `L` has columns `x[sigma_i] - x[sigma_{d+1}]`. A point `z` in the hull of
//! the tuple has barycentric weights `lambda = (L^-1 (z - anchor), 1 - sum)`.
//! The optimal prediction at `z` weighs every admissible tuple covering `z`
//! by `|det L^-1| * f(lambda)` and credits each class with the barycentric
//! mass of its vertices.

mod barycentric;
mod line;
mod linalg;
mod sample;
mod set;
pub mod verify;
mod xi;

pub use barycentric::{in_hull, lambda_from_point, SimplexChart};
pub use line::LineMixupPredictor;
pub use sample::{
    mix_points, sample_mixed, sample_simplex, write_mixed_stream, MixedSampler, SamplingMode,
};
pub use set::{build_mixing_set, default_cap, is_admissible, write_mixing_set};
pub use xi::{optimal_prediction, xi, MixupOracle, UncoveredPolicy};

use crate::error::{param, Result};
use crate::rng::LabRng;

/// Absolute tolerance on barycentric components for hull membership.
pub const HULL_TOL: f64 = 1e-9;

/// An ordered `(d + 1)`-tuple of dataset indices; the last entry is the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingIndexSet {
    pub indices: Vec<usize>,
    pub diameter_cap: f64,
}

impl MixingIndexSet {
    pub fn new(indices: Vec<usize>, diameter_cap: f64) -> Result<Self> {
        if indices.len() < 2 {
            return Err(param("a mixing tuple needs at least two indices"));
        }
        Ok(Self {
            indices,
            diameter_cap,
        })
    }

    pub fn d(&self) -> usize {
        self.indices.len() - 1
    }

    pub fn anchor(&self) -> usize {
        self.indices[self.d()]
    }
}

/// Barycentric coordinates: `d + 1` numbers summing to one. Coordinates of
/// points outside the hull have negative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeight(Vec<f64>);

impl SimplexWeight {
    /// Weights of a point inside the simplex: nonnegative up to `1e-12`, sum
    /// equal to one up to `1e-10`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(param("empty weight vector"));
        }
        if w.iter().any(|x| !x.is_finite() || *x < -1e-12) {
            return Err(param(format!("weights {w:?} are not nonnegative")));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(param(format!("weights sum to {s}, not 1")));
        }
        Ok(Self(w))
    }

    pub(crate) fn affine(w: Vec<f64>) -> Self {
        Self(w)
    }

    /// The `j`-th vertex of the `d`-simplex.
    pub fn vertex(d: usize, j: usize) -> Self {
        let mut w = vec![0.0; d + 1];
        w[j] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn d(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_inside(&self, tol: f64) -> bool {
        self.0.iter().all(|&x| x >= -tol)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Distribution of mixing weights on the `d`-simplex.
#[derive(Debug, Clone, PartialEq)]
pub enum MixDistribution {
    /// Uniform on the simplex. Its density in the chart given by the first
    /// `d` coordinates is the constant `d!`.
    Uniform { d: usize },
    /// Point mass; handy for pinning the weights in tests. Has no density.
    Fixed(SimplexWeight),
}

impl MixDistribution {
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(param("mixing dimension must be at least 1"));
        }
        Ok(Self::Uniform { d })
    }

    pub fn d(&self) -> usize {
        match self {
            Self::Uniform { d } => *d,
            Self::Fixed(w) => w.d(),
        }
    }

    pub fn sample(&self, rng: &mut LabRng) -> SimplexWeight {
        match self {
            Self::Uniform { d } => sample_simplex(rng, *d),
            Self::Fixed(w) => w.clone(),
        }
    }

    /// Density at `lambda` in the first-`d`-coordinates chart.
    pub fn density(&self, lambda: &[f64]) -> Option<f64> {
        match self {
            Self::Uniform { d } => {
                if lambda.iter().all(|&x| x >= -HULL_TOL) {
                    Some((1..=*d).map(|i| i as f64).product())
                } else {
                    Some(0.0)
                }
            }
            Self::Fixed(_) => None,
        }
    }
}

/// A mixed input with its soft label.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPoint {
    pub z: Vec<f64>,
    pub source_sigma: MixingIndexSet,
    pub lambda: SimplexWeight,
    pub soft_label: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_density_is_d_factorial() {
        let m = MixDistribution::uniform(3).unwrap();
        assert_eq!(m.density(&[0.25; 4]), Some(6.0));
        assert_eq!(m.density(&[1.5, -0.5, 0.0, 0.0]), Some(0.0));
        assert!(MixDistribution::uniform(0).is_err());
    }

    #[test]
    fn simplex_weight_validation() {
        assert!(SimplexWeight::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexWeight::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexWeight::new(vec![1.5, -0.5]).is_err());
    }
}
