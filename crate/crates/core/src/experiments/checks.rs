//! Directional checks on finished sweeps. They are reported alongside the
//! records; only hard failures change a run's exit status.

use super::config::{Arm, ExperimentConfig, ExperimentKind};
use super::record::{summarize, ArmRecord, Check, SummaryRow};

/// Largest tolerated single increase of the ERM+TS KL curve in alpha.
pub const KL_INVERSION_ALLOWANCE: f64 = 0.02;
/// Required factor between ERM+TS and Mixup-optimal KL at the smallest alpha.
pub const KL_GAP_FACTOR: f64 = 3.0;
/// Bound on `(max - min) / min` of the Mixup-optimal KL across alpha.
pub const MIXUP_KL_VARIATION: f64 = 0.5;
/// Required growth of the ERM+TS NLL from the largest to the smallest mu.
pub const NLL_GROWTH_FACTOR: f64 = 2.0;
pub const MIXUP_T_RANGE: (f64, f64) = (0.8, 1.25);
pub const MIXUP_TS_NLL_CHANGE: f64 = 0.05;

pub fn evaluate_checks(cfg: &ExperimentConfig, records: &[ArmRecord]) -> Vec<Check> {
    let summary = summarize(records);
    let mean = |v: f64, arm: Arm, metric: &str| -> Option<f64> {
        summary
            .iter()
            .find(|s: &&SummaryRow| s.sweep_value == v && s.arm == arm && s.metric == metric)
            .map(|s| s.mean)
    };
    let mut values = cfg.sweep_values().to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        out.push(Check {
            name: name.to_string(),
            passed,
            detail,
        })
    };
    match cfg.kind {
        ExperimentKind::IntervalSweep if values.len() >= 2 => {
            let erm: Option<Vec<f64>> = values.iter().map(|&v| mean(v, Arm::ErmTs, "expected_kl")).collect();
            let opt: Option<Vec<f64>> =
                values.iter().map(|&v| mean(v, Arm::MixupOptimal, "expected_kl")).collect();
            if let Some(erm) = &erm {
                let (ok, detail) = nonincreasing(erm, KL_INVERSION_ALLOWANCE);
                push("erm+ts KL nonincreasing in alpha", ok, detail);
            }
            if let (Some(erm), Some(opt)) = (&erm, &opt) {
                push(
                    "erm+ts KL exceeds mixup-optimal KL at smallest alpha",
                    erm[0] > KL_GAP_FACTOR * opt[0],
                    format!("{:.4} vs {KL_GAP_FACTOR} x {:.4}", erm[0], opt[0]),
                );
            }
            if let Some(opt) = &opt {
                let v = variation(opt);
                push(
                    "mixup-optimal KL roughly constant in alpha",
                    v < MIXUP_KL_VARIATION,
                    format!("(max - min) / min = {v:.3}, bound {MIXUP_KL_VARIATION}"),
                );
            }
        }
        ExperimentKind::GaussianSweep if values.len() >= 2 => {
            let (lo, hi) = (values[0], values[values.len() - 1]);
            let ratio = |arm| Some(mean(lo, arm, "nll")? / mean(hi, arm, "nll")?);
            if let Some(r) = ratio(Arm::ErmTs) {
                push(
                    "erm+ts NLL grows with overlap",
                    r >= NLL_GROWTH_FACTOR,
                    format!("NLL(mu={lo}) / NLL(mu={hi}) = {r:.3}"),
                );
                if let Some(m) = ratio(Arm::Mixup) {
                    push(
                        "mixup NLL grows less than erm+ts",
                        m < r,
                        format!("mixup ratio {m:.3}, erm+ts ratio {r:.3}"),
                    );
                }
            }
            for &v in &values[..2] {
                if let (Some(m), Some(e)) = (mean(v, Arm::Mixup, "ece"), mean(v, Arm::ErmTs, "ece")) {
                    push(
                        &format!("mixup ECE below erm+ts ECE at mu={v}"),
                        m < e,
                        format!("{m:.4} vs {e:.4}"),
                    );
                }
            }
        }
        ExperimentKind::TsAblation => {
            for &v in &values {
                if let (Some(a), Some(b)) = (mean(v, Arm::Erm, "cal_nll"), mean(v, Arm::ErmTs, "cal_nll")) {
                    push(
                        &format!("temperature lowers erm calibration-split NLL at rate {v}"),
                        b <= a,
                        format!("{b:.5} vs {a:.5}"),
                    );
                }
                if let (Some(t), Some(a), Some(b)) = (
                    mean(v, Arm::MixupTs, "temperature"),
                    mean(v, Arm::Mixup, "nll"),
                    mean(v, Arm::MixupTs, "nll"),
                ) {
                    let change = (b - a).abs() / a;
                    push(
                        &format!("temperature barely changes mixup at rate {v}"),
                        (MIXUP_T_RANGE.0..=MIXUP_T_RANGE.1).contains(&t) && change < MIXUP_TS_NLL_CHANGE,
                        format!("T = {t:.3}, relative NLL change {change:.4}"),
                    );
                }
            }
        }
        _ => {}
    }
    out
}

/// Whether `v` never rises, except for at most one rise of at most `allow`.
pub fn nonincreasing(v: &[f64], allow: f64) -> (bool, String) {
    let rises: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    let ok = rises.is_empty() || (rises.len() == 1 && rises[0] <= allow);
    let curve: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    (ok, format!("curve [{}]", curve.join(", ")))
}

pub fn variation(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / min
}
