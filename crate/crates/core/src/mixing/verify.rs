//! Independent cross-check of the optimal d-Mixup predictor.
//!
//! Nothing here shares code with the production path: tuples are enumerated
//! by recursion with their own admissibility test, barycentric weights come
//! from Cramer's rule over Leibniz determinants, and the prediction is the
//! numerical minimizer of the pointwise mixing cross-entropy
//! `F(p) = -sum_{sigma covering z} |det L^-1| f(lambda) sum_j lambda_j log p[y_j]`
//! over the probability simplex.

use rand::Rng;

use super::{build_mixing_set, sample_simplex, MixDistribution, MixupOracle};
use crate::distributions::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Determinant by the permutation expansion. Exponential; fine for `n <= 6`.
pub fn leibniz_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    permute(&mut perm, 0, m, &mut total);
    total
}

fn permute(perm: &mut Vec<usize>, at: usize, m: &[Vec<f64>], total: &mut f64) {
    let n = perm.len();
    if at == n {
        let mut inversions = 0;
        for i in 0..n {
            for j in i + 1..n {
                if perm[i] > perm[j] {
                    inversions += 1;
                }
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        *total += sign * (0..n).map(|r| m[r][perm[r]]).product::<f64>();
        return;
    }
    for i in at..n {
        perm.swap(at, i);
        permute(perm, at + 1, m, total);
        perm.swap(at, i);
    }
}

/// Barycentric weights by Cramer's rule: weight `i` is the determinant with
/// column `i` of the difference matrix replaced by `z - anchor`, over the
/// determinant itself. `None` for a singular matrix.
pub fn cramer_weights(vertices: &[&[f64]], z: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = vertices.len() - 1;
    let anchor = vertices[d];
    let col = |c: usize, r: usize| vertices[c][r] - anchor[r];
    let base: Vec<Vec<f64>> = (0..d).map(|r| (0..d).map(|c| col(c, r)).collect()).collect();
    let det = leibniz_det(&base);
    if det == 0.0 {
        return None;
    }
    let mut w = Vec::with_capacity(d + 1);
    for i in 0..d {
        let mut m = base.clone();
        for r in 0..d {
            m[r][i] = z[r] - anchor[r];
        }
        w.push(leibniz_det(&m) / det);
    }
    w.push(1.0 - w.iter().sum::<f64>());
    Some((w, det))
}

fn admissible(points: &[&[f64]], cap: f64) -> bool {
    let d = points.len() - 1;
    let anchor = points[d];
    let diff = |i: usize| -> Vec<f64> { points[i].iter().zip(anchor).map(|(a, b)| a - b).collect() };
    let gram = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let diffs: Vec<Vec<f64>> = (0..d).map(diff).collect();
    for i in 0..d {
        if diffs[i].iter().all(|&v| v == 0.0) {
            return false;
        }
    }
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let c = gram(&diffs[i], &diffs[j])
                / (gram(&diffs[i], &diffs[i]).sqrt() * gram(&diffs[j], &diffs[j]).sqrt());
            if c > 1.0 / (2 * d) as f64 {
                return false;
            }
        }
    }
    for i in 0..points.len() {
        for j in 0..points.len() {
            let dd: f64 = points[i]
                .iter()
                .zip(points[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if dd > cap {
                return false;
            }
        }
    }
    true
}

/// All admissible tuples, enumerated recursively.
pub fn enumerate_tuples(data: &LabeledDataset, d: usize, cap: f64) -> Vec<Vec<usize>> {
    fn rec(
        data: &LabeledDataset,
        d: usize,
        cap: f64,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if prefix.len() == d + 1 {
            let pts: Vec<&[f64]> = prefix.iter().map(|&i| data.point(i)).collect();
            if admissible(&pts, cap) {
                out.push(prefix.clone());
            }
            return;
        }
        for i in 0..data.len() {
            prefix.push(i);
            rec(data, d, cap, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(data, d, cap, &mut Vec::new(), &mut out);
    out
}

/// The pointwise mixing cross-entropy at a fixed `z`, as a list of
/// `(coefficient, class)` terms.
#[derive(Debug, Clone)]
pub struct PointwiseObjective {
    terms: Vec<(f64, usize)>,
    k: usize,
}

impl PointwiseObjective {
    pub fn at(data: &LabeledDataset, tuples: &[Vec<usize>], d: usize, z: &[f64]) -> Self {
        let density: f64 = (1..=d).map(|i| i as f64).product();
        let mut terms = Vec::new();
        for t in tuples {
            let pts: Vec<&[f64]> = t.iter().map(|&i| data.point(i)).collect();
            let Some((w, det)) = cramer_weights(&pts, z) else {
                continue;
            };
            if w.iter().any(|&l| l < -super::HULL_TOL) {
                continue;
            }
            for (j, &i) in t.iter().enumerate() {
                terms.push((density / det.abs() * w[j].max(0.0), data.label(i)));
            }
        }
        Self {
            terms,
            k: data.num_classes(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.iter().all(|t| t.0 == 0.0)
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        -self
            .terms
            .iter()
            .filter(|t| t.0 > 0.0)
            .map(|&(c, y)| c * p[y].ln())
            .sum::<f64>()
    }

    /// Minimize over the probability simplex with a diagonally scaled
    /// projected-gradient (equality-constrained Newton) iteration and
    /// backtracking that keeps iterates strictly feasible. Classes without a
    /// positive term get probability zero, since moving their mass elsewhere
    /// strictly lowers the objective.
    pub fn minimize(&self) -> Option<Vec<f64>> {
        let total: f64 = self.terms.iter().map(|t| t.0).sum();
        if !(total > 0.0) {
            return None;
        }
        let mut coef = vec![0.0; self.k];
        for &(c, y) in &self.terms {
            coef[y] += c / total;
        }
        let support: Vec<usize> = (0..self.k).filter(|&y| coef[y] > 0.0).collect();
        let f = |q: &[f64]| -> f64 { -support.iter().map(|&y| coef[y] * q[y].ln()).sum::<f64>() };
        let mut p = vec![0.0; self.k];
        for &y in &support {
            p[y] = 1.0 / support.len() as f64;
        }
        for _ in 0..500 {
            let g: Vec<f64> = support.iter().map(|&y| -coef[y] / p[y]).collect();
            let h: Vec<f64> = support.iter().map(|&y| coef[y] / (p[y] * p[y])).collect();
            let nu = -g.iter().zip(&h).map(|(g, h)| g / h).sum::<f64>()
                / h.iter().map(|h| 1.0 / h).sum::<f64>();
            let step: Vec<f64> = g.iter().zip(&h).map(|(g, h)| -(g + nu) / h).collect();
            let decrement: f64 = g.iter().zip(&h).map(|(g, h)| (g + nu).powi(2) / h).sum();
            if decrement < 1e-24 {
                break;
            }
            let f0 = f(&p);
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            let mut t = 1.0;
            loop {
                let mut q = p.clone();
                for (s, &y) in step.iter().zip(&support) {
                    q[y] += t * s;
                }
                if support.iter().all(|&y| q[y] > 0.0) && f(&q) <= f0 + 1e-4 * t * slope {
                    p = q;
                    break;
                }
                t *= 0.5;
                if t < 1e-30 {
                    return Some(p);
                }
            }
        }
        Some(p)
    }
}

/// Result of checking one dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum VerifyOutcome {
    Skipped { reason: String },
    Checked {
        tuples: usize,
        points: usize,
        max_deviation: f64,
    },
}

/// Compare the closed-form prediction with the numerical minimizer at
/// `n_points` covered points drawn by mixing random admissible tuples.
/// Also checks the production mixing set against the independent enumeration.
pub fn verify_dataset(
    data: &LabeledDataset,
    d: usize,
    cap: f64,
    n_points: usize,
    seed: u64,
) -> Result<VerifyOutcome> {
    if data.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: data.dim(),
        });
    }
    let sets = match build_mixing_set(data, d, cap) {
        Ok(s) => s,
        Err(Error::InsufficientData(reason)) => return Ok(VerifyOutcome::Skipped { reason }),
        Err(e) => return Err(e),
    };
    let brute = enumerate_tuples(data, d, cap);
    let prod: Vec<Vec<usize>> = sets.iter().map(|s| s.indices.clone()).collect();
    if prod != brute {
        return Err(Error::Verification(format!(
            "mixing set has {} tuples, exhaustive enumeration has {}",
            prod.len(),
            brute.len()
        )));
    }
    if sets.is_empty() {
        return Ok(VerifyOutcome::Skipped {
            reason: "empty mixing set".into(),
        });
    }
    let mix = MixDistribution::uniform(d)?;
    let oracle = MixupOracle::new(data, &sets, &mix)?;
    let mut rng = seeded(seed);
    let mut max_dev: f64 = 0.0;
    for _ in 0..n_points {
        let s = &sets[rng.random_range(0..sets.len())];
        let lam = sample_simplex(&mut rng, d);
        let mut z = vec![0.0; d];
        for (&i, &l) in s.indices.iter().zip(lam.as_slice()) {
            for (zc, xc) in z.iter_mut().zip(data.point(i)) {
                *zc += l * xc;
            }
        }
        let fast = oracle.optimal_prediction(&z)?;
        let slow = PointwiseObjective::at(data, &brute, d, &z)
            .minimize()
            .ok_or(Error::Uncovered)?;
        for (a, b) in fast.iter().zip(&slow) {
            max_dev = max_dev.max((a - b).abs());
        }
    }
    Ok(VerifyOutcome::Checked {
        tuples: sets.len(),
        points: n_points,
        max_deviation: max_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leibniz_matches_known_values() {
        assert_eq!(leibniz_det(&[vec![2.0]]), 2.0);
        assert_eq!(leibniz_det(&[vec![1.0, 2.0], vec![3.0, 4.0]]), -2.0);
        let m = vec![
            vec![2.0, 0.0, 1.0],
            vec![1.0, 3.0, 2.0],
            vec![1.0, 1.0, 1.0],
        ];
        // 2(3-2) - 0 + 1(1-3) = 0
        assert_eq!(leibniz_det(&m), 0.0);
    }

    #[test]
    fn minimizer_finds_weighted_split() {
        let obj = PointwiseObjective {
            terms: vec![(3.0, 0), (1.0, 2), (0.0, 1)],
            k: 3,
        };
        let p = obj.minimize().unwrap();
        assert!((p[0] - 0.75).abs() < 1e-10 && (p[2] - 0.25).abs() < 1e-10 && p[1] == 0.0);
    }

    #[test]
    fn all_identical_points_are_skipped() {
        let data = LabeledDataset::new(vec![vec![0.5]; 4], vec![0, 1, 0, 1], 2, 0, "t").unwrap();
        let out = verify_dataset(&data, 1, f64::INFINITY, 5, 0).unwrap();
        assert!(matches!(out, VerifyOutcome::Skipped { .. }));
    }

    #[test]
    fn single_class_has_zero_deviation() {
        let data = LabeledDataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.1], vec![0.2, 1.0], vec![1.1, 1.2]],
            vec![1; 4],
            3,
            0,
            "t",
        )
        .unwrap();
        match verify_dataset(&data, 2, f64::INFINITY, 10, 1).unwrap() {
            VerifyOutcome::Checked { max_deviation, .. } => assert_eq!(max_deviation, 0.0),
            other => panic!("{other:?}"),
        }
    }
}
