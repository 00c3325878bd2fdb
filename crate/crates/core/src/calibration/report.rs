use serde::Serialize;

use super::bins::{ace, ece, Bin};
use super::predictions::{nll, PredictionSet};
use crate::error::Result;

/// Every metric for one predictor on one evaluation set. Non-finite numbers
/// serialize as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub nll: f64,
    pub ece: f64,
    pub ace: f64,
    pub expected_kl: Option<f64>,
    pub temperature: f64,
    pub n_bins: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub n: usize,
    pub zero_probability_rows: usize,
    /// Uniform-bin reliability table used for the ECE.
    pub bins: Vec<Bin>,
}

impl CalibrationReport {
    pub fn evaluate(
        preds: &PredictionSet,
        n_bins: usize,
        seed: u64,
        temperature: f64,
        expected_kl: Option<f64>,
    ) -> Result<Self> {
        let (e, table) = ece(preds, n_bins)?;
        let (a, _) = ace(preds, n_bins)?;
        Ok(Self {
            nll: nll(preds),
            ece: e,
            ace: a,
            expected_kl,
            temperature,
            n_bins,
            seed,
            accuracy: preds.accuracy(),
            n: preds.len(),
            zero_probability_rows: preds.zero_probability_rows().len(),
            bins: table.bins,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
