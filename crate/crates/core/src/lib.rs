//! Calibration laboratory: synthetic overlapping-class distributions with exact
//! posteriors, ERM / Mixup / d-Mixup training of small softmax classifiers, the
//! closed-form d-Mixup optimal predictor, temperature scaling (empirical and
//! oracle) and the usual calibration metrics.
//!
//! Class labels are zero-based everywhere in this crate: a `k`-class problem
//! uses labels `0..k`.

pub mod calibration;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod math;
pub mod mixing;
pub mod rng;
pub mod training;

pub use calibration::{
    ace, apply_temperature, ece, expected_kl, fit_temperature_nll, fit_temperature_oracle, nll,
    reliability_export, BinMode, BinTable, CalibrationReport, PredictionSet, Predictor,
    TemperatureFit,
};
pub use distributions::{
    inject_label_noise, GaussianPairSpec, GroundTruth, IntervalSpec, LabeledDataset, NoisePlan,
};
pub use error::{Error, Result};
pub use mixing::{
    build_mixing_set, in_hull, lambda_from_point, optimal_prediction, sample_mixed, xi,
    MixDistribution, MixedPoint, MixingIndexSet, MixupOracle, SimplexWeight,
};
pub use training::{
    check_interpolation, dmixup_loss, erm_loss, logit_gap_probe, mixup_loss, train, Objective,
    SoftmaxClassifier, TrainConfig,
};
