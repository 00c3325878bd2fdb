use super::kl::KlSample;
use super::Predictor;
use crate::distributions::GroundTruth;
use crate::error::{param, Error, Result};
use crate::math::{log_softmax, mean, softmax};

/// Initial search interval for `T`.
pub const T_SEARCH_BRACKET: (f64, f64) = (1e-3, 1e3);
/// Absolute tolerance of the golden-section search in `log T`.
pub const LOG_T_TOLERANCE: f64 = 1e-4;
/// The interval is widened when the optimum sits on an edge, but never past
/// `[1/T_LIMIT, T_LIMIT]`.
const T_LIMIT: f64 = 1e12;

pub fn apply_temperature(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(param(format!("temperature must be positive, got {t}")));
    }
    Ok(softmax(&logits.iter().map(|v| v / t).collect::<Vec<_>>()))
}

/// Wraps a predictor and divides its log-probabilities by `t` before
/// renormalizing. Since log-probabilities differ from logits by a per-row
/// constant this equals `softmax(logits / t)`.
#[derive(Debug, Clone)]
pub struct Tempered<P> {
    pub inner: P,
    pub t: f64,
}

impl<P: Predictor> Tempered<P> {
    pub fn new(inner: P, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(param(format!("temperature must be positive, got {t}")));
        }
        Ok(Self { inner, t })
    }
}

impl<P: Predictor> Predictor for Tempered<P> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn log_proba(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .inner
            .log_proba(xs)?
            .iter()
            .map(|l| tempered_log_proba(l, self.t))
            .collect())
    }
}

pub(crate) fn tempered_log_proba(log_p: &[f64], t: f64) -> Vec<f64> {
    if t == 1.0 {
        return log_p.to_vec();
    }
    log_softmax(&log_p.iter().map(|v| v / t).collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureFit {
    pub temperature: f64,
    pub objective: f64,
    /// Final search interval in `T`.
    pub bracket: (f64, f64),
    /// Every `(T, objective)` evaluated, in order.
    pub trace: Vec<(f64, f64)>,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[a, b]` until the
/// interval is shorter than `tol`. NaN values compare as `+inf`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimize `f(log T)`. Starts on [`T_SEARCH_BRACKET`] and slides the interval
/// outward while the optimum lies on its edge. The returned point is the best
/// of the golden-section optimum, the two final endpoints and `T = 1`.
fn search_log_t(f: impl Fn(f64) -> f64) -> Result<TemperatureFit> {
    let mut trace = Vec::new();
    let mut eval = |lt: f64| {
        let v = f(lt);
        trace.push((lt.exp(), v));
        v
    };
    let (mut lo, mut hi) = (T_SEARCH_BRACKET.0.ln(), T_SEARCH_BRACKET.1.ln());
    let step = T_SEARCH_BRACKET.1.ln();
    let limit = T_LIMIT.ln();
    let (mut x, mut fx);
    loop {
        (x, fx) = golden_section(&mut eval, lo, hi, LOG_T_TOLERANCE);
        if hi - x < 2.0 * LOG_T_TOLERANCE && hi < limit {
            lo = hi - 2.0;
            hi = (hi + step).min(limit);
        } else if x - lo < 2.0 * LOG_T_TOLERANCE && lo > -limit {
            hi = lo + 2.0;
            lo = (lo - step).max(-limit);
        } else {
            break;
        }
    }
    let mut best = (x, fx);
    for cand in [lo, hi, 0.0] {
        let v = eval(cand);
        if v < best.1 || best.1.is_nan() {
            best = (cand, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok(TemperatureFit {
        temperature: best.0.exp(),
        objective: best.1,
        bracket: (lo.exp(), hi.exp()),
        trace,
    })
}

/// Temperature minimizing the mean NLL of `softmax(logits / T)` on a
/// held-out split.
pub fn fit_temperature_nll(logits: &[Vec<f64>], labels: &[usize]) -> Result<TemperatureFit> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(param("calibration split must be nonempty with one label per row"));
    }
    if logits.iter().zip(labels).any(|(l, &y)| y >= l.len()) {
        return Err(param("label outside the logit range"));
    }
    search_log_t(|lt: f64| {
        let t = lt.exp();
        let terms: Vec<f64> = logits
            .iter()
            .zip(labels)
            .map(|(l, &y)| -log_softmax(&l.iter().map(|v| v / t).collect::<Vec<_>>())[y])
            .collect();
        mean(&terms)
    })
}

/// Temperature minimizing the expected KL from the exact posterior to the
/// tempered prediction. All candidate temperatures share one Monte Carlo
/// sample drawn from `seed`.
pub fn fit_temperature_oracle(
    model: &dyn Predictor,
    truth: &dyn GroundTruth,
    n_mc: usize,
    seed: u64,
) -> Result<TemperatureFit> {
    let sample = KlSample::draw(truth, n_mc, seed)?;
    fit_temperature_on_sample(model, &sample)
}

pub fn fit_temperature_on_sample(model: &dyn Predictor, sample: &KlSample) -> Result<TemperatureFit> {
    let lp = model.log_proba(sample.points())?;
    search_log_t(|lt| sample.kl_of_log_proba(&lp, lt.exp()).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::argmax;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn identity_and_limit() {
        let l = [2.0, -1.0, 0.5];
        assert_eq!(apply_temperature(&l, 1.0).unwrap(), softmax(&l));
        for p in apply_temperature(&l, 1e9).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
        assert!(apply_temperature(&l, 0.0).is_err());
        assert!(apply_temperature(&l, -1.0).is_err());
    }

    #[test]
    fn argmax_is_temperature_invariant() {
        let mut rng = seeded(4);
        for _ in 0..1000 {
            let l: Vec<f64> = (0..5).map(|_| rng.random_range(-10.0..10.0)).collect();
            for t in [0.1, 1.0, 10.0] {
                assert_eq!(argmax(&apply_temperature(&l, t).unwrap()), argmax(&l));
            }
        }
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), -2.0, 5.0, 1e-8);
        assert!((x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn scaling_logits_scales_temperature() {
        let mut rng = seeded(9);
        let logits: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        // labels drawn from softmax(logits / 2) put the optimum inside the bracket
        let labels: Vec<usize> = logits
            .iter()
            .map(|l| {
                let p = apply_temperature(l, 2.0).unwrap();
                let u: f64 = rng.random();
                if u < p[0] {
                    0
                } else if u < p[0] + p[1] {
                    1
                } else {
                    2
                }
            })
            .collect();
        let a = fit_temperature_nll(&logits, &labels).unwrap();
        let scaled: Vec<Vec<f64>> = logits.iter().map(|l| l.iter().map(|v| v * 10.0).collect()).collect();
        let b = fit_temperature_nll(&scaled, &labels).unwrap();
        assert!(((b.temperature / a.temperature).ln() - 10f64.ln()).abs() < 2.0 * LOG_T_TOLERANCE);
    }

    #[test]
    fn uninformative_logits_push_temperature_out() {
        // labels independent of logits: the best tempered model is uniform
        let logits = vec![vec![5.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0], vec![0.0, 5.0]];
        let labels = vec![0, 1, 0, 1];
        let fit = fit_temperature_nll(&logits, &labels).unwrap();
        assert!(fit.temperature > 1e3);
        assert!(fit.objective <= 2f64.ln() + 1e-6);
        let (lo, hi) = fit.bracket;
        let obj_at = |t: f64| fit.trace.iter().find(|p| p.0 == t).map(|p| p.1).unwrap();
        assert!(fit.objective <= obj_at(lo) && fit.objective <= obj_at(hi));
    }

    #[test]
    fn rejects_empty_split() {
        assert!(fit_temperature_nll(&[], &[]).is_err());
    }
}
