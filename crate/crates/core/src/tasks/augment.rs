//! Per-episode input augmentations: random linear projections, input
//! permutations and bilinear rescaling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, VsmlError};

/// Square random projection with i.i.d. `N(0, 1/dim)` entries, fixed for the
/// whole episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    dim: usize,
    matrix: Vec<f64>,
}

impl Projection {
    pub fn from_seed(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).expect("positive std");
        Projection {
            dim,
            matrix: (0..dim * dim).map(|_| normal.sample(&mut rng)).collect(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Projection { dim, matrix }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "projection input size");
        self.matrix
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(p, v)| p * v).sum())
            .collect()
    }
}

/// `x' = P x` with `P` drawn from `seed`.
pub fn apply_projection(x: &[f64], seed: u64) -> Vec<f64> {
    Projection::from_seed(x.len(), seed).apply(x)
}

/// Seeded permutation of the input axis: `x'[i] = x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(pub Vec<usize>);

impl Permutation {
    pub fn from_seed(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p: Vec<usize> = (0..dim).collect();
        p.shuffle(&mut rng);
        Permutation(p)
    }

    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.0.iter().map(|&i| x[i]).collect()
    }
}

pub const RESCALE_SIZES: [usize; 3] = [14, 28, 32];

/// Bilinear resampling of a square `side x side` image to `size x size`
/// (pixel-center aligned). Output is clamped to `[0, 1]`.
pub fn rescale(image: &[f64], side: usize, size: usize) -> Result<Vec<f64>> {
    if !RESCALE_SIZES.contains(&size) {
        return Err(VsmlError::config(format!(
            "unsupported rescale size {size}; expected one of {RESCALE_SIZES:?}"
        )));
    }
    if image.len() != side * side {
        return Err(VsmlError::Dimension {
            what: "square image",
            expected: side * side,
            actual: image.len(),
        });
    }
    let scale = side as f64 / size as f64;
    let coord = |i: usize| -> (usize, usize, f64) {
        let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(side - 1);
        (lo, hi, s - lo as f64)
    };
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        let (r0, r1, fr) = coord(r);
        for c in 0..size {
            let (c0, c1, fc) = coord(c);
            let top = image[r0 * side + c0] * (1.0 - fc) + image[r0 * side + c1] * fc;
            let bottom = image[r1 * side + c0] * (1.0 - fc) + image[r1 * side + c1] * fc;
            out.push((top * (1.0 - fr) + bottom * fr).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}
