//! Synthetic ground-truth distributions with exact posteriors, and paired-class
//! label noise.

mod dataset;
mod gaussian;
mod intervals;
mod noise;

pub use dataset::LabeledDataset;
pub use gaussian::GaussianPairSpec;
pub use intervals::IntervalSpec;
pub use noise::{inject_label_noise, NoisePlan};

use crate::error::{param, Result};
use crate::rng::{seeded, LabRng};

/// A generative model `pi(X, Y)` that can be sampled and whose posterior
/// `pi(Y | X = x)` is known in closed form.
pub trait GroundTruth {
    fn num_classes(&self) -> usize;

    fn dim(&self) -> usize;

    /// One draw `(x, y)` from the joint distribution.
    fn draw(&self, rng: &mut LabRng) -> (Vec<f64>, usize);

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Short human-readable description recorded as dataset provenance.
    fn describe(&self) -> String;

    fn sample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(param("sample size must be at least 1"));
        }
        let mut rng = seeded(seed);
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, y) = self.draw(&mut rng);
            points.push(x);
            labels.push(y);
        }
        LabeledDataset::new(points, labels, self.num_classes(), seed, self.describe())
    }
}
