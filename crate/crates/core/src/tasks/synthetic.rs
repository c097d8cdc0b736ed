//! Synthetic classification problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Example;

/// A fixed set of standard-normal points with uniformly drawn labels.
/// Regenerated from a new seed for every episode.
pub fn make_random_task(seed: u64, n_points: usize, dims: usize, classes: usize) -> Vec<Example> {
    assert!(classes >= 2, "need at least two classes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_points)
        .map(|_| {
            let x = (0..dims).map(|_| StandardNormal.sample(&mut rng)).collect();
            let label = rng.gen_range(0..classes);
            Example { x, label }
        })
        .collect()
}

/// Label of a sum-sign input: `1` if the sum is strictly positive, else `0`.
pub fn sum_sign_label(x: &[f64]) -> usize {
    usize::from(x.iter().sum::<f64>() > 0.0)
}

/// Endless stream of standard-normal inputs labelled by the sign of their sum.
#[derive(Debug, Clone)]
pub struct SumSign {
    rng: ChaCha8Rng,
    dims: usize,
}

pub fn make_sum_sign(seed: u64, dims: usize) -> SumSign {
    assert!(dims >= 1);
    SumSign {
        rng: ChaCha8Rng::seed_from_u64(seed),
        dims,
    }
}

impl Iterator for SumSign {
    type Item = Example;

    fn next(&mut self) -> Option<Example> {
        let x: Vec<f64> = (0..self.dims)
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect();
        let label = sum_sign_label(&x);
        Some(Example { x, label })
    }
}

/// Noisy copies of per-episode class prototypes drawn uniformly from
/// `[-1, 1]^dims`. Zero-mean prototypes keep different classes uncorrelated.
///
/// Each episode draws fresh prototypes, so nothing about the class layout can
/// be memorized across episodes; it can only be learned online.
#[derive(Debug, Clone)]
pub struct Clusters {
    rng: ChaCha8Rng,
    prototypes: Vec<Vec<f64>>,
    noise: f64,
}

pub fn make_clusters(seed: u64, dims: usize, classes: usize, noise: f64) -> Clusters {
    assert!(classes >= 2 && dims >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes = (0..classes)
        .map(|_| (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Clusters {
        rng,
        prototypes,
        noise,
    }
}

impl Clusters {
    pub fn prototypes(&self) -> &[Vec<f64>] {
        &self.prototypes
    }
}

impl Iterator for Clusters {
    type Item = Example;

    fn next(&mut self) -> Option<Example> {
        let label = self.rng.gen_range(0..self.prototypes.len());
        let x = self.prototypes[label]
            .iter()
            .map(|&p| {
                let n: f64 = StandardNormal.sample(&mut self.rng);
                p + self.noise * n
            })
            .collect();
        Some(Example { x, label })
    }
}
