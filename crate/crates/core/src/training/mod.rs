//! Small rectifier MLPs with a softmax head, trained by Adam under ERM, Mixup
//! or d-Mixup, plus probes of interpolation and local logit stability.

mod adam;
mod checkpoint;
mod grid;
mod loss;
mod model;
mod probe;
mod train;

pub use adam::Adam;
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use grid::{GridEncoding, GridSpec};
pub use loss::{
    dmixup_batch, dmixup_loss, erm_batch, erm_loss, loss_and_gradient, mixup_batch, mixup_loss,
    soft_cross_entropy, SoftBatch,
};
pub use model::{Dense, Gradient, LogitModel, SoftmaxClassifier};
pub use probe::{
    check_interpolation, logit_gap_probe, InterpolationReport, RadiusGap, RegularityProbe,
};
pub use train::{train, write_loss_history, Objective, TrainConfig, Trained};
