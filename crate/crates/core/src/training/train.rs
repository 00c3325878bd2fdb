use std::io::Write;

use rand::seq::SliceRandom;

use super::adam::Adam;
use super::loss::{dmixup_batch, erm_batch, loss_and_gradient, mixup_batch};
use super::grid::GridSpec;
use super::model::SoftmaxClassifier;
use crate::distributions::LabeledDataset;
use crate::error::{param, Error, Result};
use crate::mixing::MixDistribution;
use crate::rng::{derive, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Erm,
    Mixup,
    DMixup { d: usize },
}

impl Objective {
    pub fn name(&self) -> String {
        match self {
            Objective::Erm => "erm".into(),
            Objective::Mixup => "mixup".into(),
            Objective::DMixup { d } => format!("dmixup{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: Objective,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Standardize inputs with training-set statistics before the first layer.
    pub standardize: bool,
    /// Learned grid encoding of the inputs in place of standardization.
    pub grid: Option<GridSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Erm,
            epochs: 200,
            batch_size: 500,
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            seed: 0,
            hidden: vec![128, 128],
            standardize: true,
            grid: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(param("epochs must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(param(format!(
                "batch size {} outside 1..={n}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(param("learning rate must be positive"));
        }
        let (b1, b2) = self.betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(param("adam betas must lie in [0, 1)"));
        }
        if self.hidden.contains(&0) {
            return Err(param("hidden widths must be positive"));
        }
        match self.objective {
            Objective::Mixup if self.batch_size < 2 => {
                Err(param("mixup needs a batch size of at least 2"))
            }
            Objective::DMixup { d } if d == 0 || self.batch_size < d + 1 => Err(param(format!(
                "d-mixup with d = {d} needs d >= 1 and batch size >= d + 1"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: SoftmaxClassifier,
    /// Mini-batch loss after every optimizer step.
    pub loss_history: Vec<f64>,
}

/// Train with Adam. Every epoch reshuffles the data with a generator derived
/// from the seed; a trailing partial batch is kept.
pub fn train(data: &LabeledDataset, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate(data.len())?;
    let mut model = SoftmaxClassifier::build(
        data.dim(),
        &cfg.hidden,
        data.num_classes(),
        cfg.grid,
        derive(cfg.seed, 1),
    )?;
    if cfg.standardize || cfg.grid.is_some() {
        model.fit_input_scaling(data);
    }
    let mix = match cfg.objective {
        Objective::Erm => None,
        Objective::Mixup => Some(MixDistribution::uniform(1)?),
        Objective::DMixup { d } => Some(MixDistribution::uniform(d)?),
    };
    let mut rng = seeded(derive(cfg.seed, 2));
    let mut opt = Adam::new(model.param_count(), cfg.learning_rate, cfg.betas, 1e-8);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs * data.len().div_ceil(cfg.batch_size));
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            let batch = match (cfg.objective, &mix) {
                (Objective::Mixup, Some(m)) if idx.len() >= 2 => mixup_batch(data, idx, m, &mut rng)?,
                (Objective::DMixup { d }, Some(m)) if idx.len() > d => {
                    dmixup_batch(data, idx, d, m, &mut rng)?
                }
                _ => erm_batch(data, idx)?,
            };
            let (loss, grad) = loss_and_gradient(&model, &batch);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    step: history.len(),
                    loss,
                });
            }
            opt.step(&mut model, &grad);
            history.push(loss);
        }
    }
    Ok(Trained {
        model,
        loss_history: history,
    })
}

pub fn write_loss_history<W: Write>(history: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "step,loss")?;
    for (i, l) in history.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GroundTruth;
    use crate::training::check_interpolation;

    fn two_points() -> LabeledDataset {
        LabeledDataset::new(vec![vec![-1.0], vec![1.0]], vec![0, 1], 2, 0, "pair").unwrap()
    }

    #[test]
    fn separable_pair_is_interpolated() {
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 2,
            learning_rate: 1e-2,
            hidden: vec![16],
            ..TrainConfig::default()
        };
        let t = train(&two_points(), &cfg).unwrap();
        let r = check_interpolation(&t.model, &two_points()).unwrap();
        assert_eq!(r.training_error, 0.0);
        assert!(r.min_gap() > 2f64.ln());
        assert_eq!(t.loss_history.len(), 500);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = crate::distributions::IntervalSpec::new(4, 0.5)
            .unwrap()
            .sample(64, 1)
            .unwrap();
        for objective in [Objective::Erm, Objective::Mixup, Objective::DMixup { d: 2 }] {
            let cfg = TrainConfig {
                objective,
                epochs: 3,
                batch_size: 16,
                hidden: vec![8, 8],
                seed: 11,
                ..TrainConfig::default()
            };
            let a = train(&data, &cfg).unwrap();
            let b = train(&data, &cfg).unwrap();
            assert_eq!(a.model, b.model);
            assert_eq!(a.loss_history, b.loss_history);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let d = two_points();
        let base = TrainConfig {
            batch_size: 2,
            ..TrainConfig::default()
        };
        assert!(train(&d, &TrainConfig { epochs: 0, ..base.clone() }).is_err());
        assert!(train(&d, &TrainConfig { batch_size: 3, ..base.clone() }).is_err());
        assert!(train(
            &d,
            &TrainConfig {
                objective: Objective::DMixup { d: 2 },
                ..base.clone()
            }
        )
        .is_err());
    }

    #[test]
    fn huge_learning_rate_diverges_loudly() {
        let data = crate::distributions::IntervalSpec::new(4, 0.5)
            .unwrap()
            .sample(64, 1)
            .unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e300,
            hidden: vec![8],
            ..TrainConfig::default()
        };
        assert!(matches!(train(&data, &cfg), Err(Error::Diverged { .. })));
    }
}
