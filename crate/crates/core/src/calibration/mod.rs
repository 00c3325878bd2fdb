//! Calibration metrics (NLL, ECE, ACE, expected KL to a known posterior) and
//! temperature scaling fitted either on held-out labels or against the exact
//! posterior.

mod bins;
mod kl;
mod predictions;
mod report;
mod temperature;

pub use bins::{ace, ece, reliability_export, Bin, BinMode, BinTable, HistogramBin, Reliability};
pub use kl::{expected_kl, KlEstimate, KlSample};
pub use predictions::{nll, PredictionSet};
pub use report::CalibrationReport;
pub use temperature::{
    apply_temperature, fit_temperature_nll, fit_temperature_on_sample, fit_temperature_oracle,
    golden_section, Tempered, TemperatureFit, LOG_T_TOLERANCE, T_SEARCH_BRACKET,
};
pub(crate) use temperature::tempered_log_proba;

use crate::error::Result;

/// Anything that outputs a predictive distribution over `k` classes.
pub trait Predictor {
    fn num_classes(&self) -> usize;

    /// Natural-log class probabilities, one row per input. Entries may be
    /// `-inf` where the predicted probability is exactly zero.
    fn log_proba(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    fn predict(&self, xs: &[Vec<f64>], labels: &[usize]) -> Result<PredictionSet> {
        PredictionSet::from_log_proba(self.log_proba(xs)?, labels.to_vec())
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn log_proba(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        (**self).log_proba(xs)
    }
}
