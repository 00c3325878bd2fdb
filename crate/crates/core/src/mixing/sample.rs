use std::io::Write;

use rand::Rng;

use super::{MixDistribution, MixedPoint, MixingIndexSet, SimplexWeight};
use crate::distributions::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, LabRng};

/// Uniform draw from the `d`-simplex: the gaps between `d` sorted uniforms
/// on `[0, 1]`.
pub fn sample_simplex(rng: &mut LabRng, d: usize) -> SimplexWeight {
    let mut cuts: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut w = Vec::with_capacity(d + 1);
    let mut prev = 0.0;
    for c in cuts {
        w.push(c - prev);
        prev = c;
    }
    w.push(1.0 - prev);
    SimplexWeight::affine(w)
}

/// Which tuples may be mixed.
#[derive(Debug, Clone, Copy)]
pub enum SamplingMode<'a> {
    /// Any `d + 1` indices drawn with replacement (what training does).
    Unconstrained,
    /// Only tuples from a precomputed admissible set.
    Restricted(&'a [MixingIndexSet]),
}

/// `z = sum_j lambda_j x[idx_j]` and the matching soft label.
pub fn mix_points(data: &LabeledDataset, idx: &[usize], lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut z = vec![0.0; data.dim()];
    let mut soft = vec![0.0; data.num_classes()];
    for (&i, &l) in idx.iter().zip(lambda) {
        for (zc, xc) in z.iter_mut().zip(data.point(i)) {
            *zc += l * xc;
        }
        soft[data.label(i)] += l;
    }
    (z, soft)
}

/// Stream of mixed points from one seeded generator.
pub struct MixedSampler<'a> {
    data: &'a LabeledDataset,
    mix: MixDistribution,
    mode: SamplingMode<'a>,
    rng: LabRng,
}

impl<'a> MixedSampler<'a> {
    pub fn new(
        data: &'a LabeledDataset,
        mix: MixDistribution,
        mode: SamplingMode<'a>,
        seed: u64,
    ) -> Result<Self> {
        let d = mix.d();
        if data.len() < d + 1 {
            return Err(Error::InsufficientData(format!(
                "{} points cannot form a {}-tuple",
                data.len(),
                d + 1
            )));
        }
        if let SamplingMode::Restricted(sets) = mode {
            if sets.is_empty() {
                return Err(Error::InsufficientData("mixing set is empty".into()));
            }
            if sets.iter().any(|s| s.d() != d) {
                return Err(Error::Parameter("tuple size does not match mixing dimension".into()));
            }
        }
        Ok(Self {
            data,
            mix,
            mode,
            rng: seeded(seed),
        })
    }

    pub fn next_point(&mut self) -> MixedPoint {
        let d = self.mix.d();
        let sigma = match self.mode {
            SamplingMode::Unconstrained => MixingIndexSet {
                indices: (0..=d)
                    .map(|_| self.rng.random_range(0..self.data.len()))
                    .collect(),
                diameter_cap: f64::INFINITY,
            },
            SamplingMode::Restricted(sets) => sets[self.rng.random_range(0..sets.len())].clone(),
        };
        let lambda = self.mix.sample(&mut self.rng);
        let (z, soft_label) = mix_points(self.data, &sigma.indices, lambda.as_slice());
        MixedPoint {
            z,
            source_sigma: sigma,
            lambda,
            soft_label,
        }
    }
}

pub fn sample_mixed(
    data: &LabeledDataset,
    mix: &MixDistribution,
    mode: SamplingMode<'_>,
    seed: u64,
) -> Result<MixedPoint> {
    Ok(MixedSampler::new(data, mix.clone(), mode, seed)?.next_point())
}

/// One row per point: `z` coordinates, then the `k` soft-label values.
pub fn write_mixed_stream<W: Write>(points: &[MixedPoint], mut w: W) -> Result<()> {
    for p in points {
        let row: Vec<String> = p
            .z
            .iter()
            .chain(&p.soft_label)
            .map(|v| v.to_string())
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> LabeledDataset {
        LabeledDataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
            vec![0, 1, 1, 2],
            3,
            0,
            "t",
        )
        .unwrap()
    }

    #[test]
    fn vertex_mixing_reproduces_the_point() {
        let d = data();
        let mix = MixDistribution::Fixed(SimplexWeight::vertex(2, 1));
        let p = sample_mixed(&d, &mix, SamplingMode::Unconstrained, 4).unwrap();
        let j = p.source_sigma.indices[1];
        assert_eq!(p.z, d.point(j));
        let mut e = vec![0.0; 3];
        e[d.label(j)] = 1.0;
        assert_eq!(p.soft_label, e);
    }

    #[test]
    fn same_class_tuple_gives_one_hot() {
        let d = LabeledDataset::new(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![1, 1, 1],
            2,
            0,
            "t",
        )
        .unwrap();
        let mix = MixDistribution::uniform(2).unwrap();
        let mut s = MixedSampler::new(&d, mix, SamplingMode::Unconstrained, 1).unwrap();
        for _ in 0..20 {
            let p = s.next_point();
            assert!((p.soft_label[1] - 1.0).abs() < 1e-12 && p.soft_label[0] == 0.0);
        }
    }

    #[test]
    fn restricted_mode_needs_a_nonempty_set() {
        let d = data();
        let mix = MixDistribution::uniform(1).unwrap();
        assert!(matches!(
            sample_mixed(&d, &mix, SamplingMode::Restricted(&[]), 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn simplex_draws_sum_to_one() {
        let mut rng = seeded(0);
        for d in 1..6 {
            let w = sample_simplex(&mut rng, d);
            assert_eq!(w.as_slice().len(), d + 1);
            assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.is_inside(0.0));
        }
    }

    #[test]
    fn stream_format() {
        let d = data();
        let mix = MixDistribution::Fixed(SimplexWeight::vertex(1, 0));
        let p = sample_mixed(&d, &mix, SamplingMode::Unconstrained, 0).unwrap();
        let mut buf = Vec::new();
        write_mixed_stream(std::slice::from_ref(&p), &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(line.trim().split(',').count(), 2 + 3);
    }
}
