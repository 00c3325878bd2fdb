//! Values checked against oracles computed independently in this file:
//! Monte Carlo frequencies, closed-form densities, hand enumeration and a
//! projected-gradient minimizer.

use calib_core::calibration::{ace, ece, fit_temperature_nll, nll, reliability_export, BinMode};
use calib_core::mixing::{
    build_mixing_set, is_admissible, sample_simplex, MixDistribution, MixingIndexSet,
    MixupOracle, SimplexChart,
};
use calib_core::rng::seeded;
use calib_core::{
    inject_label_noise, GaussianPairSpec, GroundTruth, IntervalSpec, LabeledDataset, NoisePlan,
    PredictionSet,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn sample_categorical(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Random predictive distributions with labels drawn from them.
fn calibrated_sample(n: usize, k: usize, seed: u64) -> PredictionSet {
    let mut rng = seeded(seed);
    let mut probs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let logits: Vec<f64> = (0..k).map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|v| v / s).collect();
        labels.push(sample_categorical(&p, &mut rng));
        probs.push(p);
    }
    PredictionSet::new(probs, labels).unwrap()
}

#[test]
fn interval_class_mass_in_overlap() {
    let spec = IntervalSpec::new(10, 0.2).unwrap();
    let data = spec.sample(100_000, 3).unwrap();
    let class1: Vec<f64> = data
        .points()
        .iter()
        .zip(data.labels())
        .filter(|(_, &y)| y == 1)
        .map(|(x, _)| x[0])
        .collect();
    // zero-based class 1 has support [0.2, 1.2]; its overlap with class 0 is [0.2, 1]
    let frac = class1.iter().filter(|&&x| x <= 1.0).count() as f64 / class1.len() as f64;
    assert!((frac - 0.8).abs() <= 0.01, "{frac}");
}

#[test]
fn gaussian_class_mean_converges() {
    let spec = GaussianPairSpec::isotropic(300, 0.05).unwrap();
    let data = spec.sample(100_000, 4).unwrap();
    let mut sum = vec![0.0; 300];
    let mut n = 0usize;
    for (x, &y) in data.points().iter().zip(data.labels()) {
        if y == 1 {
            n += 1;
            for (s, v) in sum.iter_mut().zip(x) {
                *s += v;
            }
        }
    }
    // standard error per coordinate is about 1 / sqrt(5e4) = 0.0045
    let worst = sum.iter().map(|s| (s / n as f64 - 0.05).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "{worst}");
    let within = sum.iter().filter(|s| (*s / n as f64 - 0.05).abs() < 0.01).count();
    assert!(within as f64 >= 0.95 * 300.0, "{within}");
}

#[test]
fn gaussian_posterior_matches_density_ratio() {
    let dim = 7;
    let mut rng = seeded(5);
    let mu: Vec<f64> = (0..dim).map(|i| 0.3 * i as f64 - 0.5).collect();
    let spec = GaussianPairSpec::new(mu.clone()).unwrap();
    for _ in 0..200 {
        let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let log_phi = |m: &[f64]| -> f64 {
            -0.5 * x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let (a, b) = (log_phi(&vec![0.0; dim]), log_phi(&mu));
        let p1 = b.exp() / (a.exp() + b.exp());
        let post = spec.posterior(&x).unwrap();
        assert!((post[1] - p1).abs() < 1e-12, "{} vs {p1}", post[1]);
        assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn label_noise_flip_rate() {
    let spec = IntervalSpec::new(4, 0.5).unwrap();
    let data = spec.sample(100_000, 6).unwrap();
    let plan = NoisePlan::new(vec![1, 0, 3, 2], 0.25).unwrap();
    let noisy = inject_label_noise(&data, &plan, 7).unwrap();
    let flipped = data
        .labels()
        .iter()
        .zip(noisy.labels())
        .filter(|(a, b)| a != b)
        .count() as f64
        / 1e5;
    assert!((flipped - 0.25).abs() <= 0.005, "{flipped}");
}

#[test]
fn correlated_pair_is_not_admissible() {
    let (a, b, c): ([f64; 2], [f64; 2], [f64; 2]) = ([0.0, 0.0], [1.0, 0.0], [0.9, 0.1]);
    let u = [b[0] - a[0], b[1] - a[1]];
    let v = [c[0] - a[0], c[1] - a[1]];
    let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
    assert!((cos - 0.994).abs() < 1e-3 && cos > 0.25);
    assert!(!is_admissible(&[&b, &c, &a], 10.0));
}

#[test]
fn barycentric_round_trip_in_three_dimensions() {
    let mut rng = seeded(8);
    for _ in 0..1000 {
        let verts: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = verts.iter().map(|v| v.as_slice()).collect();
        let chart = SimplexChart::new(&refs).unwrap();
        if chart.det().abs() < 1e-3 {
            continue;
        }
        let lam = sample_simplex(&mut rng, 3);
        let z: Vec<f64> = (0..3)
            .map(|c| (0..4).map(|j| lam.as_slice()[j] * verts[j][c]).sum())
            .collect();
        let back = chart.weights(&z).unwrap();
        let rec: Vec<f64> = (0..3)
            .map(|c| (0..4).map(|j| back.as_slice()[j] * verts[j][c]).sum())
            .collect();
        let err = z.iter().zip(&rec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }
}

#[test]
fn uniform_simplex_first_weight_has_mean_half() {
    let mut rng = seeded(9);
    let n = 100_000;
    let s: f64 = (0..n).map(|_| sample_simplex(&mut rng, 1).as_slice()[0]).sum();
    assert!((s / n as f64 - 0.5).abs() <= 0.005);
}

fn line(xs: &[f64], ys: &[usize], k: usize) -> LabeledDataset {
    LabeledDataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec(), k, 0, "hand").unwrap()
}

#[test]
fn five_point_xi_by_hand() {
    // points 0, 1, 2, 3, 4 with labels a b a c b; z = 1.5 is inside the
    // segments {0,2}, {0,3}, {0,4}, {1,2}, {1,3}, {1,4} (both orders)
    let data = line(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 2, 1], 3);
    let z = 1.5;
    let mut xi = [0.0; 3];
    for i in 0..5 {
        for j in 0..5 {
            let (a, b) = (data.point(i)[0], data.point(j)[0]);
            if i == j || a == b {
                continue;
            }
            let lam = (z - b) / (a - b);
            if !(0.0..=1.0).contains(&lam) {
                continue;
            }
            let w = 1.0 / (a - b).abs();
            xi[data.label(i)] += w * lam;
            xi[data.label(j)] += w * (1.0 - lam);
        }
    }
    let sets = build_mixing_set(&data, 1, f64::INFINITY).unwrap();
    let oracle = MixupOracle::new(&data, &sets, &MixDistribution::uniform(1).unwrap()).unwrap();
    let got = oracle.xi_all(&[z]).unwrap();
    for y in 0..3 {
        assert!((got[y] - xi[y]).abs() < 1e-12, "{got:?} vs {xi:?}");
    }
}

/// Euclidean projection onto the probability simplex.
fn project(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Minimize `-sum_y c_y log p_y` over the simplex by projected gradient.
fn projected_gradient(c: &[f64]) -> Vec<f64> {
    let k = c.len();
    let mut p = vec![1.0 / k as f64; k];
    let total: f64 = c.iter().sum();
    for it in 0..200_000 {
        let step = 1e-3 / total * (1.0 + it as f64).powf(-0.1);
        let g: Vec<f64> = p.iter().zip(c).map(|(pi, ci)| -ci / pi.max(1e-300)).collect();
        let q = project(&p.iter().zip(&g).map(|(pi, gi)| pi - step * gi).collect::<Vec<_>>());
        let q: Vec<f64> = q.iter().map(|v| v.max(1e-15)).collect();
        let s: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|v| v / s).collect();
        let moved = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = q;
        if moved < 1e-8 {
            break;
        }
    }
    p
}

#[test]
fn six_point_planar_prediction_matches_convex_minimizer() {
    let pts = [[0.0, 0.0], [1.0, 0.1], [0.1, 1.0], [1.1, 1.0], [0.5, -0.4], [-0.3, 0.6]];
    let labels = [0, 1, 2, 0, 1, 2];
    let data = LabeledDataset::new(pts.iter().map(|p| p.to_vec()).collect(), labels.to_vec(), 3, 0, "plane").unwrap();
    let sets: Vec<MixingIndexSet> = build_mixing_set(&data, 2, f64::INFINITY).unwrap();
    let oracle = MixupOracle::new(&data, &sets, &MixDistribution::uniform(2).unwrap()).unwrap();
    for z in [[0.45, 0.4], [0.6, 0.55], [0.3, 0.2]] {
        // pointwise objective: each covering tuple contributes
        // |det|^-1 * 2! * sum_j lambda_j (-log p_{y_j})
        let mut c = [0.0; 3];
        for s in &sets {
            let [a, b, o] = [s.indices[0], s.indices[1], s.indices[2]];
            let (pa, pb, po) = (pts[a], pts[b], pts[o]);
            let m = [[pa[0] - po[0], pb[0] - po[0]], [pa[1] - po[1], pb[1] - po[1]]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let r = [z[0] - po[0], z[1] - po[1]];
            let l1 = (r[0] * m[1][1] - m[0][1] * r[1]) / det;
            let l2 = (m[0][0] * r[1] - r[0] * m[1][0]) / det;
            let l3 = 1.0 - l1 - l2;
            if l1 < -1e-12 || l2 < -1e-12 || l3 < -1e-12 {
                continue;
            }
            let w = 2.0 / det.abs();
            c[labels[a]] += w * l1;
            c[labels[b]] += w * l2;
            c[labels[o]] += w * l3;
        }
        assert!(c.iter().sum::<f64>() > 0.0, "z {z:?} is not covered");
        let want = projected_gradient(&c);
        let got = oracle.optimal_prediction(&z).unwrap();
        for y in 0..3 {
            assert!((got[y] - want[y]).abs() <= 1e-4, "z {z:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn nll_of_self_sampled_labels_is_mean_entropy() {
    let p = calibrated_sample(100_000, 5, 10);
    let entropy: f64 = p
        .probs()
        .iter()
        .map(|r| -r.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>())
        .sum::<f64>()
        / p.len() as f64;
    assert!((nll(&p) - entropy).abs() <= 0.01, "{} vs {entropy}", nll(&p));
}

#[test]
fn calibrated_sample_has_small_binned_errors() {
    let p = calibrated_sample(100_000, 5, 11);
    assert!(ece(&p, 15).unwrap().0 <= 0.01);
    assert!(ace(&p, 15).unwrap().0 <= 0.01);
    let rel = reliability_export(&p, 15, BinMode::Uniform).unwrap();
    for b in rel.table.bins.iter().filter(|b| b.count >= 1000) {
        assert!((b.accuracy - b.mean_conf).abs() <= 0.02, "{b:?}");
    }
}

#[test]
fn self_consistent_logits_fit_unit_temperature() {
    let p = calibrated_sample(100_000, 5, 12);
    let logits: Vec<Vec<f64>> = p.probs().iter().map(|r| r.iter().map(|v| v.ln()).collect()).collect();
    let fit = fit_temperature_nll(&logits, p.labels()).unwrap();
    assert!((fit.temperature - 1.0).abs() <= 0.05, "{}", fit.temperature);
}
