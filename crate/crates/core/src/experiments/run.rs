//! Experiment runners. Every cell (replicate, sweep value) gets its own seed
//! `derive(replicate_seed(base, r), sweep_index)`, and every random quantity
//! inside a cell draws from a fixed named stream of that seed, so results do
//! not depend on which arms are requested.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use super::checks::evaluate_checks;
use super::config::{Arm, DistributionKind, ExperimentConfig, ExperimentKind, TemperatureMode};
use super::record::{
    create, metric_rows, replicate_file_name, write_replicate_csv, write_summary_csv, ArmRecord,
    RunRecord,
};
use crate::calibration::{
    fit_temperature_nll, fit_temperature_on_sample, nll, reliability_export, BinMode,
    tempered_log_proba, CalibrationReport, KlSample, PredictionSet, Predictor,
};
use crate::distributions::{
    inject_label_noise, GaussianPairSpec, GroundTruth, IntervalSpec, LabeledDataset, NoisePlan,
};
use crate::error::{param, Error, Result};
use crate::mixing::verify::{verify_dataset, VerifyOutcome};
use crate::mixing::{default_cap, LineMixupPredictor};
use crate::rng::{derive, replicate_seed, seeded};
use crate::training::{
    check_interpolation, logit_gap_probe, read_checkpoint, train, write_checkpoint,
    write_loss_history, Objective, RegularityProbe, SoftmaxClassifier, TrainConfig,
};

const STREAM_TRAIN: u64 = 10;
const STREAM_TEST: u64 = 11;
const STREAM_MC: u64 = 12;
const STREAM_SPLIT: u64 = 13;
const STREAM_PLAN: u64 = 14;
const STREAM_NOISE_TRAIN: u64 = 15;
const STREAM_NOISE_CAL: u64 = 16;
const STREAM_MODEL: u64 = 20;
const STREAM_PROBE: u64 = 30;
const STREAM_VERIFY: u64 = 40;

/// Run an experiment. With `out` set, per-replicate CSVs are written as
/// each replicate finishes, followed by `summary.csv`, `run.json`,
/// `config.toml` and the per-arm artifacts.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    let cfg = cfg.clone().resolved();
    cfg.validate()?;
    let start = Instant::now();
    let mut sink = Sink::new(out)?;
    if let Some(dir) = &sink.dir {
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in 0..cfg.replicates() {
        let seed_r = replicate_seed(cfg.seed, r);
        let mut rep = Vec::new();
        for (vi, &v) in cfg.sweep_values().iter().enumerate() {
            let cell = Cell {
                cfg: &cfg,
                value: v,
                index: vi,
                replicate: r,
                replicate_seed: seed_r,
                seed: derive(seed_r, vi as u64),
            };
            let res = match cfg.kind {
                ExperimentKind::GaussianSweep
                | ExperimentKind::IntervalSweep
                | ExperimentKind::TsAblation => cell.run_arms(&mut sink),
                ExperimentKind::OracleVerify => cell.run_verify(&mut failures),
                ExperimentKind::LogitProbe => cell.run_probe(&mut sink),
            };
            match res {
                Ok(recs) => rep.extend(recs),
                Err(e) => {
                    sink.replicate(r, &rep)?;
                    return Err(e);
                }
            }
        }
        sink.replicate(r, &rep)?;
        records.extend(rep);
    }
    let checks = evaluate_checks(&cfg, &records);
    let mut run = RunRecord {
        config: cfg,
        records,
        checks,
        failures,
        artifacts: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    if let Some(dir) = sink.dir.clone() {
        let path = dir.join("summary.csv");
        let mut w = create(&path)?;
        write_summary_csv(&run.summary(), &mut w)?;
        w.flush()?;
        sink.artifacts.push(path);
        sink.artifacts.push(dir.join("run.json"));
    }
    run.artifacts = sink.artifacts;
    run.wall_clock_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &sink.dir {
        fs::write(dir.join("run.json"), run.to_json())?;
    }
    Ok(run)
}

struct Sink {
    dir: Option<PathBuf>,
    artifacts: Vec<PathBuf>,
}

impl Sink {
    fn new(out: Option<&Path>) -> Result<Self> {
        if let Some(d) = out {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: out.map(Path::to_path_buf),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(name);
        let mut w = create(&path)?;
        f(&mut w)?;
        w.flush()?;
        self.artifacts.push(path);
        Ok(())
    }

    fn replicate(&mut self, r: usize, records: &[ArmRecord]) -> Result<()> {
        let rows = metric_rows(records);
        self.write(&replicate_file_name(r), |w| write_replicate_csv(&rows, w))
    }
}

fn file_arm(arm: Arm) -> String {
    arm.name().replace('+', "-")
}

/// One (replicate, sweep value) pair.
struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    value: f64,
    index: usize,
    replicate: usize,
    replicate_seed: u64,
    seed: u64,
}

struct Splits {
    train: LabeledDataset,
    cal: Option<LabeledDataset>,
    test: LabeledDataset,
}

/// Log-probabilities of one predictor on every evaluation set of a cell.
struct Outputs {
    test: Vec<Vec<f64>>,
    cal: Option<Vec<Vec<f64>>>,
    kl: Vec<Vec<f64>>,
}

impl<'a> Cell<'a> {
    fn stream(&self, s: u64) -> u64 {
        derive(self.seed, s)
    }

    fn suffix(&self) -> String {
        format!("v{}_r{}", self.index, self.replicate)
    }

    /// The ground truth of this cell; the sweep value replaces mu or alpha
    /// for the sweeps and the probe, and is the noise rate for the ablation.
    fn truth(&self) -> Result<Box<dyn GroundTruth>> {
        let d = &self.cfg.data;
        let swept = self.cfg.kind != ExperimentKind::TsAblation;
        Ok(match self.cfg.distribution() {
            DistributionKind::Gaussian => {
                let mu = if swept { self.value } else { d.mu.unwrap_or(0.25) };
                Box::new(GaussianPairSpec::isotropic(d.dim.unwrap_or(300), mu)?)
            }
            DistributionKind::Intervals => {
                let alpha = if swept { self.value } else { d.alpha.unwrap_or(0.5) };
                Box::new(IntervalSpec::new(d.k.unwrap_or(10), alpha)?)
            }
        })
    }

    fn splits(&self, truth: &dyn GroundTruth) -> Result<Splits> {
        let d = &self.cfg.data;
        let full = truth.sample(d.n_train.unwrap_or(2000), self.stream(STREAM_TRAIN))?;
        let test = truth.sample(d.n_test.unwrap_or(1000), self.stream(STREAM_TEST))?;
        let held_out = self.cfg.metrics.temperature == Some(TemperatureMode::Nll)
            && self.cfg.kind != ExperimentKind::LogitProbe;
        if !held_out {
            return Ok(Splits {
                train: full,
                cal: None,
                test,
            });
        }
        let n = full.len();
        let n_cal = ((n as f64 * d.cal_fraction.unwrap_or(0.1)).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded(self.stream(STREAM_SPLIT)));
        let (cal_idx, train_idx) = order.split_at(n_cal);
        let (mut cal_idx, mut train_idx) = (cal_idx.to_vec(), train_idx.to_vec());
        cal_idx.sort_unstable();
        train_idx.sort_unstable();
        let mut train = full.subset(&train_idx)?;
        let mut cal = full.subset(&cal_idx)?;
        if self.cfg.kind == ExperimentKind::TsAblation && self.value > 0.0 {
            let k = train.num_classes();
            let plan = NoisePlan::random_derangement(k, self.value, self.stream(STREAM_PLAN))?;
            train = inject_label_noise(&train, &plan, self.stream(STREAM_NOISE_TRAIN))?;
            cal = inject_label_noise(&cal, &plan, self.stream(STREAM_NOISE_CAL))?;
        }
        Ok(Splits {
            train,
            cal: Some(cal),
            test,
        })
    }

    /// The batch size is capped at the training-set size.
    fn train_config(&self, objective: Objective, n: usize) -> TrainConfig {
        let t = &self.cfg.train;
        let stream = STREAM_MODEL
            + match objective {
                Objective::Erm => 0,
                Objective::Mixup => 1,
                Objective::DMixup { .. } => 2,
            };
        TrainConfig {
            objective,
            epochs: t.epochs.unwrap_or(300),
            batch_size: t.batch_size.unwrap_or(500).min(n),
            learning_rate: t.learning_rate.unwrap_or(1e-3),
            betas: (t.beta1.unwrap_or(0.9), t.beta2.unwrap_or(0.999)),
            seed: self.stream(stream),
            hidden: t.hidden.clone().unwrap_or_default(),
            standardize: t.standardize.unwrap_or(true),
            grid: self.cfg.grid(),
        }
    }

    fn objective(&self, arm: Arm) -> Option<Objective> {
        match arm {
            Arm::Erm | Arm::ErmTs => Some(Objective::Erm),
            Arm::Mixup | Arm::MixupTs => Some(Objective::Mixup),
            Arm::DMixup => Some(Objective::DMixup {
                d: self.cfg.train.mixup_d.unwrap_or(2),
            }),
            Arm::MixupOptimal => None,
        }
    }

    /// Train (once per objective) and save the loss history and checkpoint.
    fn fit(
        &self,
        objective: Objective,
        train_set: &LabeledDataset,
        cache: &mut Vec<(Objective, SoftmaxClassifier)>,
        sink: &mut Sink,
    ) -> Result<usize> {
        if let Some(i) = cache.iter().position(|(o, _)| *o == objective) {
            return Ok(i);
        }
        let trained = train(train_set, &self.train_config(objective, train_set.len()))?;
        let stem = format!("{}_{}", objective.name(), self.suffix());
        sink.write(&format!("loss_{stem}.csv"), |w| {
            write_loss_history(&trained.loss_history, w)
        })?;
        sink.write(&format!("model_{stem}.txt"), |w| write_checkpoint(&trained.model, w))?;
        cache.push((objective, trained.model));
        Ok(cache.len() - 1)
    }

    fn outputs(&self, p: &dyn Predictor, s: &Splits, kl: &KlSample) -> Result<Outputs> {
        Ok(Outputs {
            test: p.log_proba(s.test.points())?,
            cal: s.cal.as_ref().map(|c| p.log_proba(c.points())).transpose()?,
            kl: p.log_proba(kl.points())?,
        })
    }

    fn run_arms(&self, sink: &mut Sink) -> Result<Vec<ArmRecord>> {
        let truth = self.truth()?;
        let splits = self.splits(truth.as_ref())?;
        let m = &self.cfg.metrics;
        let n_bins = m.n_bins.unwrap_or(15);
        // expected KL uses the test inputs unless a dedicated Monte Carlo
        // sample is needed for oracle temperature fitting
        let kl_sample = match m.temperature {
            Some(TemperatureMode::Oracle) => {
                KlSample::draw(truth.as_ref(), m.n_mc.unwrap_or(100_000), self.stream(STREAM_MC))?
            }
            _ => KlSample::from_points(truth.as_ref(), splits.test.points().to_vec())?,
        };
        let intervals = match self.cfg.distribution() {
            DistributionKind::Intervals => Some(IntervalSpec::new(
                truth.num_classes(),
                if self.cfg.kind == ExperimentKind::TsAblation {
                    self.cfg.data.alpha.unwrap_or(0.5)
                } else {
                    self.value
                },
            )?),
            DistributionKind::Gaussian => None,
        };

        let mut models: Vec<(Objective, SoftmaxClassifier)> = Vec::new();
        let mut cached: Vec<(Objective, Outputs)> = Vec::new();
        let mut records = Vec::new();
        for &arm in self.cfg.arms() {
            let mut extra: Vec<(String, f64)> = Vec::new();
            let (outputs, predictor_t): (&Outputs, f64);
            let optimal;
            match self.objective(arm) {
                Some(obj) => {
                    let i = self.fit(obj, &splits.train, &mut models, sink)?;
                    let model = &models[i].1;
                    if !cached.iter().any(|c| c.0 == obj) {
                        cached.push((obj, self.outputs(model, &splits, &kl_sample)?));
                    }
                    let o = &cached.iter().find(|c| c.0 == obj).unwrap().1;
                    let t = if arm.tempered() {
                        match m.temperature {
                            Some(TemperatureMode::Oracle) => {
                                fit_temperature_on_sample(model, &kl_sample)?.temperature
                            }
                            _ => {
                                let cal = splits.cal.as_ref().ok_or_else(|| {
                                    param("temperature scaling needs a calibration split")
                                })?;
                                fit_temperature_nll(o.cal.as_ref().unwrap(), cal.labels())?
                                    .temperature
                            }
                        }
                    } else {
                        1.0
                    };
                    if self.cfg.kind == ExperimentKind::IntervalSweep && obj == Objective::Erm {
                        let rep = check_interpolation(model, &splits.train)?;
                        extra.push(("fraction_interpolated".into(), rep.fraction_interpolated));
                        extra.push(("training_error".into(), rep.training_error));
                    }
                    outputs = o;
                    predictor_t = t;
                }
                None => {
                    let cap = match m.mixing_cap {
                        Some(c) => c,
                        None => default_cap(&splits.train)?,
                    };
                    let p = LineMixupPredictor::new(&splits.train, cap)?;
                    extra.push(("mixing_cap".into(), cap));
                    optimal = self.outputs(&p, &splits, &kl_sample)?;
                    outputs = &optimal;
                    predictor_t = 1.0;
                }
            }
            let t = predictor_t;
            let temper = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
                rows.iter().map(|l| tempered_log_proba(l, t)).collect()
            };
            let kl = kl_sample.kl_of_log_proba(&outputs.kl, t);
            let test_lp = temper(&outputs.test);
            if let Some(spec) = &intervals {
                extra.push((
                    "overlap_tv".into(),
                    overlap_tv(spec, kl_sample.points(), &outputs.kl, t),
                ));
            }
            if let (Some(cal), Some(lp)) = (&splits.cal, &outputs.cal) {
                let p = PredictionSet::from_log_proba(temper(lp), cal.labels().to_vec())?;
                extra.push(("cal_nll".into(), nll(&p)));
            }
            let preds = PredictionSet::from_log_proba(test_lp, splits.test.labels().to_vec())?;
            let report = CalibrationReport::evaluate(&preds, n_bins, self.replicate_seed, t, Some(kl.value))?;
            let rel = reliability_export(&preds, n_bins, BinMode::Uniform)?;
            let stem = format!("{}_{}", file_arm(arm), self.suffix());
            sink.write(&format!("reliability_{stem}.csv"), |w| rel.table.write_csv(w))?;
            sink.write(&format!("histogram_{stem}.csv"), |w| rel.write_histogram_csv(w))?;

            let mut metrics = vec![
                ("nll".to_string(), report.nll),
                ("ece".to_string(), report.ece),
                ("ace".to_string(), report.ace),
                ("accuracy".to_string(), report.accuracy),
                ("expected_kl".to_string(), kl.value),
                ("temperature".to_string(), t),
            ];
            metrics.extend(extra);
            records.push(ArmRecord {
                sweep_value: self.value,
                replicate: self.replicate,
                seed: self.replicate_seed,
                arm,
                metrics,
                report: Some(report),
            });
        }
        Ok(records)
    }

    fn run_verify(&self, failures: &mut Vec<String>) -> Result<Vec<ArmRecord>> {
        let v = &self.cfg.verify;
        let d = self.value as usize;
        let k = v.k.unwrap_or(3);
        let max_n = v.max_points.unwrap_or(8);
        let tol = v.tolerance.unwrap_or(1e-4);
        let cap = v.cap.unwrap_or(f64::INFINITY);
        let mut rng = seeded(self.stream(STREAM_VERIFY));
        let (mut checked, mut skipped, mut points) = (0usize, 0usize, 0usize);
        let mut max_dev: f64 = 0.0;
        for ds in 0..v.datasets.unwrap_or(50) {
            let n = rng.random_range(d + 1..=max_n);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
                .collect();
            let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let seed = derive(self.seed, STREAM_VERIFY + 1 + ds as u64);
            let data = LabeledDataset::new(xs, ys, k, seed, "random verification dataset")?;
            match verify_dataset(&data, d, cap, v.points_per_dataset.unwrap_or(20), seed) {
                Ok(VerifyOutcome::Checked {
                    points: p,
                    max_deviation,
                    ..
                }) => {
                    checked += 1;
                    points += p;
                    max_dev = max_dev.max(max_deviation);
                    if !(max_deviation <= tol) {
                        failures.push(format!(
                            "d = {d}, replicate {}, dataset {ds}: deviation {max_deviation:e} exceeds {tol:e}",
                            self.replicate
                        ));
                    }
                }
                Ok(VerifyOutcome::Skipped { .. }) => skipped += 1,
                Err(e @ Error::Verification(_)) => {
                    failures.push(format!("d = {d}, replicate {}, dataset {ds}: {e}", self.replicate));
                }
                Err(e) => return Err(e),
            }
        }
        Ok(vec![ArmRecord {
            sweep_value: self.value,
            replicate: self.replicate,
            seed: self.replicate_seed,
            arm: Arm::MixupOptimal,
            metrics: vec![
                ("datasets_checked".into(), checked as f64),
                ("datasets_skipped".into(), skipped as f64),
                ("points_checked".into(), points as f64),
                ("max_deviation".into(), max_dev),
            ],
            report: None,
        }])
    }

    fn run_probe(&self, sink: &mut Sink) -> Result<Vec<ArmRecord>> {
        let truth = self.truth()?;
        let splits = self.splits(truth.as_ref())?;
        let p = &self.cfg.probe;
        let probe = RegularityProbe::new(p.radii.clone().unwrap_or_default(), p.samples.unwrap_or(500))?
            .with_max_points(p.max_points.unwrap_or(100));
        let mut records = Vec::new();
        for &arm in self.cfg.arms() {
            let model = match &p.checkpoint {
                Some(path) => read_checkpoint(std::io::BufReader::new(fs::File::open(path)?))?,
                None => {
                    let obj = self.objective(arm).ok_or_else(|| {
                        param("the logit probe needs a trained arm")
                    })?;
                    let mut cache = Vec::new();
                    self.fit(obj, &splits.train, &mut cache, sink)?;
                    cache.pop().unwrap().1
                }
            };
            let gaps = logit_gap_probe(&model, &splits.train, &probe, self.stream(STREAM_PROBE))?;
            let interp = check_interpolation(&model, &splits.train)?;
            let stem = format!("{}_{}", file_arm(arm), self.suffix());
            sink.write(&format!("probe_{stem}.csv"), |w| {
                writeln!(w, "radius,mean_gap")?;
                for g in &gaps {
                    writeln!(w, "{},{}", g.radius, g.mean_gap)?;
                }
                Ok(())
            })?;
            let mut metrics = vec![
                ("fraction_interpolated".to_string(), interp.fraction_interpolated),
                ("mean_gap".to_string(), interp.mean_gap),
            ];
            metrics.extend(gaps.iter().map(|g| (format!("gap_r{}", g.radius), g.mean_gap)));
            records.push(ArmRecord {
                sweep_value: self.value,
                replicate: self.replicate,
                seed: self.replicate_seed,
                arm,
                metrics,
                report: None,
            });
        }
        Ok(records)
    }
}

/// Mean total-variation distance from the uniform distribution over the
/// tempered predictions at points inside an overlap region.
fn overlap_tv(spec: &IntervalSpec, points: &[Vec<f64>], log_proba: &[Vec<f64>], t: f64) -> f64 {
    let k = spec.k() as f64;
    let tv: Vec<f64> = points
        .iter()
        .zip(log_proba)
        .filter(|(x, _)| spec.in_overlap(x[0]))
        .map(|(_, l)| {
            0.5 * tempered_log_proba(l, t)
                .iter()
                .map(|v| (v.exp() - 1.0 / k).abs())
                .sum::<f64>()
        })
        .collect();
    crate::math::mean(&tv)
}
