//! Seeded synthetic data: pre-activation laws, post-shift softmax inputs
//! and the two-moons classification task.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distribution::{EmpiricalDistribution, SampleSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Synthetic pre-activation laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticLaw {
    StandardNormal,
    /// Right-skewed mixture: 0.75 N(-0.6, 0.5^2) + 0.25 N(1.2, 1.1^2).
    Skewed,
    /// Post-shift softmax inputs `v_i - max(v)` of length-16 vectors with
    /// N(0, 1.5^2) entries, the maximum itself excluded; every value is < 0.
    SoftmaxShift,
}

impl SyntheticLaw {
    pub fn draw(self, count: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        match self {
            SyntheticLaw::StandardNormal => (0..count).map(|_| r.sample(StandardNormal)).collect(),
            SyntheticLaw::Skewed => {
                let a = Normal::new(-0.6, 0.5).unwrap();
                let b = Normal::new(1.2, 1.1).unwrap();
                (0..count)
                    .map(|_| if r.random::<f64>() < 0.75 { a.sample(&mut r) } else { b.sample(&mut r) })
                    .collect()
            }
            SyntheticLaw::SoftmaxShift => softmax_shift_samples(&mut r, count, 16, 1.5),
        }
    }

    pub fn sample_set(self, count: usize, seed: u64) -> SampleSet {
        SampleSet::new(self.draw(count, seed), format!("{self:?}/{seed}")).expect("synthetic draws are finite")
    }
}

/// Post-shift inputs from random vectors of length `len`. The maximum
/// entry maps to exactly 0 in every vector; keeping it would put a point
/// mass of `1/len` at the top of the range and collapse the last segment,
/// so it is dropped.
pub fn softmax_shift_samples<R: Rng>(r: &mut R, count: usize, len: usize, scale: f64) -> Vec<f64> {
    assert!(len >= 2, "softmax vectors need at least two entries");
    let dist = Normal::new(0.0, scale).unwrap();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..len).map(|_| dist.sample(r)).collect();
        let (arg, max) = v
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best });
        let rest = v.iter().enumerate().filter(|&(i, _)| i != arg).map(|(_, x)| x - max);
        out.extend(rest.take(count - out.len()));
    }
    out
}

pub fn standard_normal_distribution(count: usize, bins: usize, clip: Option<(f64, f64)>, seed: u64) -> EmpiricalDistribution {
    law_distribution(SyntheticLaw::StandardNormal, count, bins, clip, seed)
}

pub fn law_distribution(
    law: SyntheticLaw,
    count: usize,
    bins: usize,
    clip: Option<(f64, f64)>,
    seed: u64,
) -> EmpiricalDistribution {
    EmpiricalDistribution::from_samples(&law.sample_set(count, seed), bins, clip).expect("valid synthetic distribution")
}

/// Labelled 2-D points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
}

/// Two interleaved half circles with Gaussian jitter; `label_noise` is the
/// probability of flipping a label.
pub fn two_moons(count: usize, noise: f64, label_noise: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let jitter = Normal::new(0.0, noise).unwrap();
    let mut inputs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % 2;
        let t = std::f64::consts::PI * r.random::<f64>();
        let (x, y) = if class == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        inputs.push([x + jitter.sample(&mut r), y + jitter.sample(&mut r)]);
        let flip = r.random::<f64>() < label_noise;
        labels.push(if flip { 1 - class } else { class });
    }
    Dataset { inputs, labels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_seeded() {
        assert_eq!(SyntheticLaw::Skewed.draw(100, 4), SyntheticLaw::Skewed.draw(100, 4));
        assert_ne!(SyntheticLaw::Skewed.draw(100, 4), SyntheticLaw::Skewed.draw(100, 5));
    }

    #[test]
    fn softmax_shift_is_non_positive() {
        let v = SyntheticLaw::SoftmaxShift.draw(1000, 1);
        assert!(v.iter().all(|&x| x <= 0.0));
        assert!(v.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn moons_balanced() {
        let d = two_moons(200, 0.1, 0.0, 3);
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 100);
    }
}
