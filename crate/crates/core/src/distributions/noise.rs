use rand::seq::SliceRandom;
use rand::Rng;

use super::LabeledDataset;
use crate::error::{param, Error, Result};
use crate::rng::seeded;

/// Flip each label to a fixed partner class with probability `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePlan {
    pairing: Vec<usize>,
    rate: f64,
}

impl NoisePlan {
    pub fn new(pairing: Vec<usize>, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Plan(format!("rate {rate} outside [0, 1]")));
        }
        let k = pairing.len();
        let mut seen = vec![false; k];
        for (y, &p) in pairing.iter().enumerate() {
            if p >= k {
                return Err(Error::Plan(format!("partner {p} of class {y} out of range")));
            }
            if p == y {
                return Err(Error::Plan(format!("class {y} is paired with itself")));
            }
            if seen[p] {
                return Err(Error::Plan(format!("class {p} is the partner of two classes")));
            }
            seen[p] = true;
        }
        Ok(Self { pairing, rate })
    }

    /// A uniformly random derangement of `0..k`: shuffle, and reshuffle
    /// whenever some class lands on itself.
    pub fn random_derangement(k: usize, rate: f64, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(param("label noise needs at least two classes"));
        }
        let mut rng = seeded(seed);
        let mut perm: Vec<usize> = (0..k).collect();
        loop {
            perm.shuffle(&mut rng);
            if perm.iter().enumerate().all(|(i, &p)| i != p) {
                break;
            }
        }
        Self::new(perm, rate)
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

pub fn inject_label_noise(
    data: &LabeledDataset,
    plan: &NoisePlan,
    seed: u64,
) -> Result<LabeledDataset> {
    if let Some(&y) = data.labels().iter().find(|&&y| y >= plan.pairing.len()) {
        return Err(Error::Plan(format!("no partner defined for class {y}")));
    }
    let mut rng = seeded(seed);
    let labels = data
        .labels()
        .iter()
        .map(|&y| {
            // one uniform per point regardless of the rate, so streams line up
            let u: f64 = rng.random();
            if u < plan.rate {
                plan.pairing[y]
            } else {
                y
            }
        })
        .collect();
    data.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{GroundTruth, IntervalSpec};

    #[test]
    fn derangement_has_no_fixed_points() {
        for seed in 0..50 {
            let p = NoisePlan::random_derangement(5, 0.1, seed).unwrap();
            assert!(p.pairing().iter().enumerate().all(|(i, &j)| i != j));
        }
        assert_eq!(NoisePlan::random_derangement(2, 0.1, 0).unwrap().pairing(), &[1, 0]);
    }

    #[test]
    fn plan_validation() {
        assert!(NoisePlan::new(vec![0, 1], 0.1).is_err());
        assert!(NoisePlan::new(vec![1, 1], 0.1).is_err());
        assert!(NoisePlan::new(vec![1, 0], 1.1).is_err());
    }

    #[test]
    fn zero_and_full_rate() {
        let data = IntervalSpec::new(4, 0.5).unwrap().sample(200, 1).unwrap();
        let plan0 = NoisePlan::random_derangement(4, 0.0, 2).unwrap();
        assert_eq!(inject_label_noise(&data, &plan0, 3).unwrap(), data);
        let plan1 = NoisePlan::new(plan0.pairing().to_vec(), 1.0).unwrap();
        let flipped = inject_label_noise(&data, &plan1, 3).unwrap();
        for (a, b) in data.labels().iter().zip(flipped.labels()) {
            assert_eq!(*b, plan1.pairing()[*a]);
        }
        assert_eq!(flipped.points(), data.points());
    }

    #[test]
    fn missing_class_is_a_plan_error() {
        let data = IntervalSpec::new(4, 0.5).unwrap().sample(50, 1).unwrap();
        let plan = NoisePlan::new(vec![1, 0], 0.5).unwrap();
        assert!(matches!(inject_label_noise(&data, &plan, 0), Err(Error::Plan(_))));
    }
}
