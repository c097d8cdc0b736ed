//! Evolution strategies over a flat parameter vector: antithetic sampling,
//! centered-rank fitness shaping and Adam on the resulting gradient estimate.
//!
//! All noise is regenerated from seeds, members are evaluated on a rayon pool
//! and reduced in member order, so results do not depend on the worker count.

mod trainer;
mod vsml;

pub use trainer::{EsCheckpointState, MetaTrainer, OuterStepLog};
pub use vsml::{evaluate_member, VsmlObjective};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VsmlError};
use crate::grad::AdamConfig;
use crate::seeds::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsConfig {
    pub population_size: usize,
    pub noise_std: f64,
    pub outer_steps: usize,
    pub adam: AdamConfig,
    /// Examples per inner-loop episode.
    pub episode_length: usize,
    pub antithetic: bool,
    pub rank_shaping: bool,
    pub seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            population_size: 1024,
            noise_std: 0.05,
            outer_steps: 10_000,
            adam: AdamConfig::default(),
            episode_length: 500,
            antithetic: true,
            rank_shaping: true,
            seed: 0,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return Err(VsmlError::config(format!("noise_std must be > 0, got {}", self.noise_std)));
        }
        if self.population_size == 0 {
            return Err(VsmlError::config("population_size must be positive"));
        }
        if self.antithetic && self.population_size % 2 != 0 {
            return Err(VsmlError::config(format!(
                "antithetic sampling needs an even population, got {}",
                self.population_size
            )));
        }
        if self.episode_length == 0 {
            return Err(VsmlError::config("episode_length must be at least 1"));
        }
        self.adam.validate()
    }

    /// Number of distinct noise vectors per step.
    pub fn noise_count(&self) -> usize {
        if self.antithetic {
            self.population_size / 2
        } else {
            self.population_size
        }
    }

    /// `(noise index, sign)` of population member `i`.
    pub fn member_noise(&self, i: usize) -> (usize, f64) {
        if self.antithetic {
            (i / 2, if i % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (i, 1.0)
        }
    }

    fn step_seed(&self, step: usize) -> u64 {
        seeds::derive(self.seed, 0x5745_0000 + step as u64)
    }

    /// Seed of the episode member `i` is evaluated on at `step`. Antithetic
    /// partners share it.
    pub fn episode_seed(&self, step: usize, i: usize) -> u64 {
        let (k, _) = self.member_noise(i);
        seeds::derive(seeds::derive(self.step_seed(step), tag::EPISODE), k as u64)
    }

    /// Regenerate noise vector `k` of `step`.
    pub fn noise(&self, step: usize, k: usize, dim: usize) -> Vec<f64> {
        let s = seeds::derive(seeds::derive(self.step_seed(step), tag::NOISE), k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

/// What an objective reports for one parameter vector on one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Summed loss to minimize; non-finite means the episode diverged.
    pub loss: f64,
    /// Final cumulative accuracy (`NaN` when not applicable).
    pub accuracy: f64,
}

/// A stochastic objective evaluated on a seeded episode.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, theta: &[f64], episode_seed: u64) -> Evaluation;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub member: usize,
    pub noise_index: usize,
    pub sign: f64,
    pub episode_seed: u64,
    pub loss: f64,
    pub accuracy: f64,
    pub diverged: bool,
}

/// Evaluate every member of the population around `theta` at `step`.
pub fn evaluate_population<O: Objective + ?Sized>(
    cfg: &EsConfig,
    theta: &[f64],
    step: usize,
    objective: &O,
) -> Vec<FitnessRecord> {
    let dim = theta.len();
    let eval_noise = |k: usize| -> Vec<(usize, FitnessRecord)> {
        let eps = cfg.noise(step, k, dim);
        let members: Vec<usize> = if cfg.antithetic { vec![2 * k, 2 * k + 1] } else { vec![k] };
        members
            .into_iter()
            .map(|i| {
                let (_, sign) = cfg.member_noise(i);
                let perturbed: Vec<f64> = theta
                    .iter()
                    .zip(&eps)
                    .map(|(t, e)| t + sign * cfg.noise_std * e)
                    .collect();
                let episode_seed = cfg.episode_seed(step, i);
                let ev = objective.evaluate(&perturbed, episode_seed);
                (
                    i,
                    FitnessRecord {
                        member: i,
                        noise_index: k,
                        sign,
                        episode_seed,
                        loss: ev.loss,
                        accuracy: ev.accuracy,
                        diverged: !ev.loss.is_finite(),
                    },
                )
            })
            .collect()
    };
    let mut all: Vec<(usize, FitnessRecord)> = (0..cfg.noise_count())
        .into_par_iter()
        .flat_map_iter(eval_noise)
        .collect();
    all.sort_by_key(|(i, _)| *i);
    all.into_iter().map(|(_, r)| r).collect()
}

/// Centered ranks in `[-0.5, 0.5]`; the lowest value gets `-0.5`. Ties are
/// broken by index.
pub fn centered_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        out[i] = r as f64 / (n - 1) as f64 - 0.5;
    }
    out
}

/// Monte-Carlo estimate of the gradient of the expected loss.
///
/// Diverged members are scored as the worst finite loss of the population;
/// if every member diverged this is an error.
pub fn es_gradient(cfg: &EsConfig, step: usize, records: &[FitnessRecord], dim: usize) -> Result<Vec<f64>> {
    if records.len() != cfg.population_size {
        return Err(VsmlError::Dimension {
            what: "fitness records",
            expected: cfg.population_size,
            actual: records.len(),
        });
    }
    let worst = records
        .iter()
        .filter(|r| !r.diverged)
        .map(|r| r.loss)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst == f64::NEG_INFINITY {
        return Err(VsmlError::Diverged { step });
    }
    let losses: Vec<f64> = records
        .iter()
        .map(|r| if r.diverged { worst } else { r.loss })
        .collect();
    let utility = if cfg.rank_shaping { centered_ranks(&losses) } else { losses };
    let mut grad = vec![0.0; dim];
    for k in 0..cfg.noise_count() {
        let coef = if cfg.antithetic {
            utility[2 * k] - utility[2 * k + 1]
        } else {
            utility[k]
        };
        if coef == 0.0 {
            continue;
        }
        let eps = cfg.noise(step, k, dim);
        for (g, e) in grad.iter_mut().zip(&eps) {
            *g += coef * e;
        }
    }
    let scale = 1.0 / (cfg.noise_std * cfg.population_size as f64);
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(grad)
}
