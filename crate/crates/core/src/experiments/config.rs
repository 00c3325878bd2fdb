//! Strict TOML experiment configuration. Unknown keys are errors; omitted
//! keys take defaults that depend on the experiment kind.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GaussianSweep,
    IntervalSweep,
    OracleVerify,
    LogitProbe,
    TsAblation,
}

impl ExperimentKind {
    /// What `sweep.values` ranges over.
    pub fn sweep_axis(&self) -> &'static str {
        match self {
            ExperimentKind::GaussianSweep => "mu",
            ExperimentKind::IntervalSweep => "alpha",
            ExperimentKind::OracleVerify => "d",
            ExperimentKind::LogitProbe => "mu or alpha",
            ExperimentKind::TsAblation => "noise rate",
        }
    }
}

/// A method whose calibration is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "erm")]
    Erm,
    #[serde(rename = "erm+ts")]
    ErmTs,
    #[serde(rename = "mixup")]
    Mixup,
    #[serde(rename = "mixup+ts")]
    MixupTs,
    #[serde(rename = "dmixup")]
    DMixup,
    /// The closed-form optimal 1-Mixup predictor (1-D data only).
    #[serde(rename = "mixup-optimal")]
    MixupOptimal,
}

impl Arm {
    pub const ALL: [Arm; 6] = [
        Arm::Erm,
        Arm::ErmTs,
        Arm::Mixup,
        Arm::MixupTs,
        Arm::DMixup,
        Arm::MixupOptimal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Arm::Erm => "erm",
            Arm::ErmTs => "erm+ts",
            Arm::Mixup => "mixup",
            Arm::MixupTs => "mixup+ts",
            Arm::DMixup => "dmixup",
            Arm::MixupOptimal => "mixup-optimal",
        }
    }

    pub fn tempered(&self) -> bool {
        matches!(self, Arm::ErmTs | Arm::MixupTs)
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown arm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Gaussian,
    Intervals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemperatureMode {
    /// Minimize NLL on the held-out calibration split.
    Nll,
    /// Minimize expected KL to the exact posterior.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub distribution: Option<DistributionKind>,
    /// Number of classes (intervals; the Gaussian pair always has two).
    pub k: Option<usize>,
    /// Interval separation when alpha is not the swept parameter.
    pub alpha: Option<f64>,
    /// Gaussian mean scale when mu is not the swept parameter.
    pub mu: Option<f64>,
    pub dim: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    /// Fraction of the training draw held out for temperature fitting.
    pub cal_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub standardize: Option<bool>,
    /// Mixing dimension of the `dmixup` arm.
    pub mixup_d: Option<usize>,
    /// `grid = false` turns the encoding off where it is the default.
    pub grid: Option<GridSetting>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSetting {
    Enabled(bool),
    Spec(GridSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub n_bins: Option<usize>,
    /// Monte Carlo draws for expected KL where the test set is not used.
    pub n_mc: Option<usize>,
    pub temperature: Option<TemperatureMode>,
    /// Fixed mixing diameter for `mixup-optimal`; the default is the
    /// 10th-percentile pairwise distance of each training draw.
    pub mixing_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random datasets per replicate and mixing dimension.
    pub datasets: Option<usize>,
    pub max_points: Option<usize>,
    pub points_per_dataset: Option<usize>,
    pub k: Option<usize>,
    /// Mixing diameter; unlimited when absent.
    pub cap: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub radii: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub max_points: Option<usize>,
    /// Probe a saved model instead of training one per arm.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub replicates: Option<usize>,
    pub arms: Option<Vec<Arm>>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub metrics: MetricConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
}

fn fill<T: Clone>(slot: &mut Option<T>, v: T) {
    if slot.is_none() {
        *slot = Some(v);
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            seed: 0,
            replicates: None,
            arms: None,
            out_dir: None,
            data: DataConfig::default(),
            train: TrainSection::default(),
            metrics: MetricConfig::default(),
            sweep: SweepConfig::default(),
            verify: VerifyConfig::default(),
            probe: ProbeConfig::default(),
        }
        .resolved()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = raw.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fill every omitted setting with the default for this kind.
    pub fn resolved(mut self) -> Self {
        use ExperimentKind::*;
        let kind = self.kind;
        let d = &mut self.data;
        fill(
            &mut d.distribution,
            match kind {
                GaussianSweep | LogitProbe => DistributionKind::Gaussian,
                _ => DistributionKind::Intervals,
            },
        );
        let gaussian = d.distribution == Some(DistributionKind::Gaussian);
        fill(&mut d.k, if gaussian { 2 } else if kind == IntervalSweep { 10 } else { 4 });
        fill(&mut d.alpha, 0.5);
        fill(&mut d.mu, 0.25);
        fill(&mut d.dim, if gaussian { 300 } else { 1 });
        fill(
            &mut d.n_train,
            match (kind, gaussian) {
                (IntervalSweep, _) => 5000,
                (OracleVerify, _) => 8,
                (LogitProbe, false) => 1000,
                _ => 2000,
            },
        );
        fill(&mut d.n_test, if kind == IntervalSweep { 5000 } else { 1000 });
        fill(&mut d.cal_fraction, 0.1);

        let interval_net = !gaussian && kind != OracleVerify;
        let t = &mut self.train;
        fill(&mut t.epochs, if interval_net { 200 } else { 300 });
        fill(&mut t.batch_size, 500);
        fill(&mut t.learning_rate, if interval_net { 1e-2 } else { 1e-3 });
        fill(&mut t.beta1, 0.9);
        fill(&mut t.beta2, 0.999);
        fill(&mut t.hidden, if interval_net { vec![64, 64] } else { vec![128, 128] });
        fill(&mut t.standardize, true);
        fill(&mut t.mixup_d, 2);
        let grid = match t.grid.take() {
            Some(GridSetting::Enabled(false)) => None,
            Some(GridSetting::Spec(s)) => Some(s),
            _ if interval_net => Some(DEFAULT_GRID),
            Some(GridSetting::Enabled(true)) => Some(DEFAULT_GRID),
            None => None,
        };
        t.grid = Some(grid.map_or(GridSetting::Enabled(false), GridSetting::Spec));

        let m = &mut self.metrics;
        fill(&mut m.n_bins, 15);
        fill(&mut m.n_mc, 100_000);
        fill(
            &mut m.temperature,
            if kind == IntervalSweep {
                TemperatureMode::Oracle
            } else {
                TemperatureMode::Nll
            },
        );

        fill(
            &mut self.sweep.values,
            match kind {
                GaussianSweep => vec![0.25, 0.05, 0.01],
                IntervalSweep => vec![0.1, 0.3, 0.5, 0.7, 0.9],
                OracleVerify => vec![1.0, 2.0],
                LogitProbe if gaussian => vec![0.25],
                LogitProbe => vec![0.5],
                TsAblation => vec![0.0],
            },
        );
        fill(&mut self.replicates, if kind == GaussianSweep { 5 } else { 1 });
        fill(
            &mut self.arms,
            match kind {
                GaussianSweep | TsAblation => vec![Arm::Erm, Arm::ErmTs, Arm::Mixup, Arm::MixupTs],
                IntervalSweep => vec![Arm::Erm, Arm::ErmTs, Arm::MixupOptimal],
                OracleVerify => vec![Arm::MixupOptimal],
                LogitProbe => vec![Arm::Erm, Arm::Mixup],
            },
        );

        let v = &mut self.verify;
        fill(&mut v.datasets, 50);
        fill(&mut v.max_points, 8);
        fill(&mut v.points_per_dataset, 20);
        fill(&mut v.k, 3);
        fill(&mut v.tolerance, 1e-4);

        let p = &mut self.probe;
        fill(&mut p.radii, (1..=10).map(f64::from).collect());
        fill(&mut p.samples, 500);
        fill(&mut p.max_points, 100);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let values = self.sweep_values();
        if values.is_empty() {
            return bad("sweep.values must not be empty".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("sweep.values must be finite".into());
        }
        if self.replicates() == 0 {
            return bad("replicates must be at least 1".into());
        }
        let arms = self.arms();
        if arms.is_empty() {
            return bad("arms must not be empty".into());
        }
        for (i, a) in arms.iter().enumerate() {
            if arms[..i].contains(a) {
                return bad(format!("arm '{a}' listed twice"));
            }
        }
        let d = &self.data;
        let gaussian = self.distribution() == DistributionKind::Gaussian;
        if arms.contains(&Arm::MixupOptimal) && self.kind != ExperimentKind::OracleVerify && gaussian {
            return bad("mixup-optimal needs one-dimensional interval data".into());
        }
        if self.kind == ExperimentKind::GaussianSweep && !gaussian {
            return bad("gaussian-sweep needs data.distribution = \"gaussian\"".into());
        }
        if self.kind == ExperimentKind::IntervalSweep && gaussian {
            return bad("interval-sweep needs data.distribution = \"intervals\"".into());
        }
        let cal = d.cal_fraction.unwrap_or(0.0);
        if !(cal > 0.0 && cal < 1.0) {
            return bad("data.cal_fraction must lie in (0, 1)".into());
        }
        if self.kind == ExperimentKind::OracleVerify {
            if values.iter().any(|v| *v != 1.0 && *v != 2.0) {
                return bad("oracle-verify sweeps d over {1, 2}".into());
            }
            let n = self.verify.max_points.unwrap_or(0);
            if !(3..=8).contains(&n) {
                return bad("verify.max_points must lie in 3..=8".into());
            }
        }
        if self.kind == ExperimentKind::LogitProbe {
            if arms.iter().any(|a| a.tempered() || *a == Arm::MixupOptimal) {
                return bad("the logit probe takes trained, untempered arms".into());
            }
            if self.probe.checkpoint.is_some() && arms.len() != 1 {
                return bad("probing a checkpoint takes exactly one arm to label it".into());
            }
        }
        let swept_alpha = matches!(self.kind, ExperimentKind::IntervalSweep | ExperimentKind::LogitProbe) && !gaussian;
        if swept_alpha && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("alpha values must lie in [0, 1]".into());
        }
        if let Some(c) = self.metrics.mixing_cap {
            if !(c > 0.0) {
                return bad("metrics.mixing_cap must be positive".into());
            }
        }
        if self.kind == ExperimentKind::TsAblation && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("ts-ablation sweeps noise rates in [0, 1]".into());
        }
        if self.metrics.n_bins == Some(0) || self.metrics.n_mc == Some(0) {
            return bad("metrics.n_bins and metrics.n_mc must be positive".into());
        }
        Ok(())
    }

    pub fn sweep_values(&self) -> &[f64] {
        self.sweep.values.as_deref().unwrap_or(&[])
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(1)
    }

    pub fn arms(&self) -> &[Arm] {
        self.arms.as_deref().unwrap_or(&[])
    }

    pub fn distribution(&self) -> DistributionKind {
        self.data.distribution.unwrap_or(DistributionKind::Intervals)
    }

    pub fn grid(&self) -> Option<GridSpec> {
        match self.train.grid {
            Some(GridSetting::Spec(s)) => Some(s),
            _ => None,
        }
    }
}

/// Grid encoding used for one-dimensional interval data unless disabled.
pub const DEFAULT_GRID: GridSpec = GridSpec {
    levels: 13,
    base_resolution: 16,
    features: 2,
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_kind_defaults() {
        let c = ExperimentConfig::from_toml_str("kind = \"interval-sweep\"\n").unwrap();
        assert_eq!(c.data.k, Some(10));
        assert_eq!(c.data.n_train, Some(5000));
        assert_eq!(c.sweep_values(), &[0.1, 0.3, 0.5, 0.7, 0.9]);
        assert_eq!(c.metrics.temperature, Some(TemperatureMode::Oracle));
        assert_eq!(c.grid(), Some(DEFAULT_GRID));
        let g = ExperimentConfig::from_toml_str("kind = \"gaussian-sweep\"\n").unwrap();
        assert_eq!(g.data.dim, Some(300));
        assert_eq!(g.grid(), None);
        assert_eq!(g.replicates(), 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("kind = \"ts-ablation\"\nseeed = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"ts-ablation\"\n[train]\nepoch = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"nope\"\n").is_err());
    }

    #[test]
    fn invariants() {
        let e = |s: &str| ExperimentConfig::from_toml_str(s).is_err();
        assert!(e("kind = \"gaussian-sweep\"\n[sweep]\nvalues = []\n"));
        assert!(e("kind = \"gaussian-sweep\"\nreplicates = 0\n"));
        assert!(e("kind = \"gaussian-sweep\"\narms = [\"erm\", \"erm\"]\n"));
        assert!(e("kind = \"gaussian-sweep\"\narms = [\"mixup-optimal\"]\n"));
        assert!(e("kind = \"oracle-verify\"\n[sweep]\nvalues = [3]\n"));
        assert!(e("kind = \"interval-sweep\"\n[sweep]\nvalues = [0.5, 1.5]\n"));
        assert!(e("kind = \"interval-sweep\"\n[metrics]\nmixing_cap = 0\n"));
        assert!(e("kind = \"logit-probe\"\narms = [\"erm+ts\"]\n"));
    }

    #[test]
    fn snapshot_round_trips() {
        let c = ExperimentConfig::from_toml_str(
            "kind = \"interval-sweep\"\nseed = 9\narms = [\"erm+ts\", \"mixup-optimal\"]\n[train]\ngrid = { levels = 4, base_resolution = 8, features = 1 }\n",
        )
        .unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.grid().unwrap().levels, 4);
    }

    #[test]
    fn arm_names_parse() {
        for a in Arm::ALL {
            assert_eq!(a.name().parse::<Arm>().unwrap(), a);
        }
        assert!("ermts".parse::<Arm>().is_err());
    }
}
