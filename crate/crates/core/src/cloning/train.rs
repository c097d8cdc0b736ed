//! Sample generation, the regression step and the curriculum.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::learner::ClonedNet;
use super::shadow::ShadowNet;
use super::{predict, sample_loss_grad, update_relative_error, CloningSample, LossWeights, SHADOW_LR};
use crate::error::{Result, VsmlError};
use crate::grad::cell::zero_grads;
use crate::grad::{AdamConfig, AdamState};
use crate::loss::{cross_entropy_grad, softmax};
use crate::params::{Dims, MetaParams};
use crate::seeds;
use crate::tasks::{DataStore, Example, Source, TaskDistribution, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Shallow shadow network, all signals from the shadow network.
    Shallow,
    /// Deep shadow network; intermediate errors from the shadow network.
    DeepTeacher,
    /// Deep network; intermediate activations and errors from the VSML RNN itself.
    DeepSelf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloningConfig {
    pub dims: Dims,
    pub shallow_widths: Vec<usize>,
    pub deep_widths: Vec<usize>,
    pub alpha: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub adam: AdamConfig,
    /// Learning rate decays geometrically to `lr * lr_final_fraction` over
    /// each stage's budget.
    pub lr_final_fraction: f64,
    pub loss_weights: LossWeights,
    pub stages: Vec<Stage>,
    /// Loss threshold to leave each stage, indexed like [`Stage`].
    pub thresholds: [f64; 3],
    /// Step budget per stage.
    pub budgets: [usize; 3],
    /// Steps averaged when comparing against a threshold.
    pub window: usize,
    /// Re-initialize the shadow network this often so weights stay diverse.
    pub shadow_reset_every: usize,
    /// Where shadow inputs come from; `None` means standard-normal random data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<TaskDistribution>,
    pub seed: u64,
}

impl Default for CloningConfig {
    fn default() -> Self {
        CloningConfig {
            dims: Dims::cloning(),
            shallow_widths: vec![8, 2],
            deep_widths: vec![8, 32, 2],
            alpha: SHADOW_LR,
            batch_size: 64,
            buffer_capacity: 1024,
            adam: AdamConfig::with_lr(2e-3),
            lr_final_fraction: 0.005,
            loss_weights: LossWeights {
                y: 10.0,
                dw: 1e4,
                db: 1e4,
                e_prev: 10.0,
            },
            stages: vec![Stage::Shallow],
            thresholds: [1e-3, 5e-3, 5e-3],
            budgets: [20_000, 20_000, 20_000],
            window: 50,
            shadow_reset_every: 256,
            data: None,
            seed: 0,
        }
    }
}

impl CloningConfig {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.dims.n < 2 {
            return Err(VsmlError::config("cloning needs N >= 2 (w and b slots)"));
        }
        for w in [&self.shallow_widths, &self.deep_widths] {
            if w.len() < 2 || w.contains(&0) {
                return Err(VsmlError::config(format!("invalid shadow widths {w:?}")));
            }
        }
        if self.shallow_widths.len() != 2 {
            return Err(VsmlError::config("shallow network must have exactly one layer"));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.window == 0 {
            return Err(VsmlError::config("batch_size, buffer_capacity and window must be positive"));
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(VsmlError::config("lr_final_fraction must be in (0, 1]"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(VsmlError::config("alpha must be positive"));
        }
        if self.stages.is_empty() {
            return Err(VsmlError::config("no curriculum stages given"));
        }
        self.adam.validate()
    }

    pub fn widths(&self, stage: Stage) -> &[usize] {
        match stage {
            Stage::Shallow => &self.shallow_widths,
            _ => &self.deep_widths,
        }
    }

    /// Curriculum stages that were skipped (e.g. stage 3 without stage 2).
    pub fn skipped_stages(&self) -> Vec<Stage> {
        let want = [Stage::Shallow, Stage::DeepTeacher, Stage::DeepSelf];
        let last = self.stages.iter().map(|s| *s as usize).max().unwrap_or(0);
        want[..last].iter().copied().filter(|s| !self.stages.contains(s)).collect()
    }
}

/// Ring buffer of recent shadow-network states.
#[derive(Debug, Clone)]
pub struct StateBuffer {
    capacity: usize,
    items: VecDeque<ShadowNet>,
}

impl StateBuffer {
    pub fn new(capacity: usize) -> Self {
        StateBuffer {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, net: ShadowNet) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(net);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &ShadowNet {
        &self.items[rng.gen_range(0..self.items.len())]
    }
}

/// Produces cloning samples for one curriculum stage.
pub struct CloningSampler {
    stage: Stage,
    widths: Vec<usize>,
    alpha: f64,
    reset_every: usize,
    shadow: ShadowNet,
    buffer: StateBuffer,
    rng: ChaCha8Rng,
    data: Option<(TaskDistribution, DataStore)>,
    pending: Vec<Example>,
    episodes: u64,
    seed: u64,
    steps: usize,
}

impl CloningSampler {
    pub fn new(cfg: &CloningConfig, stage: Stage, store: Option<&DataStore>, seed: u64) -> Result<Self> {
        let widths = cfg.widths(stage).to_vec();
        let data = match &cfg.data {
            Some(d) => {
                let store = store.cloned().unwrap_or_default();
                d.validate(&store)?;
                if d.max_input_dim(&store)? != widths[0] || d.max_classes(&store)? != *widths.last().unwrap() {
                    return Err(VsmlError::config("cloning data does not match shadow network widths"));
                }
                Some((d.clone(), store))
            }
            None => None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shadow = ShadowNet::init(&widths, cfg.alpha, &mut rng);
        let mut s = CloningSampler {
            stage,
            widths,
            alpha: cfg.alpha,
            reset_every: cfg.shadow_reset_every,
            shadow,
            buffer: StateBuffer::new(cfg.buffer_capacity),
            rng,
            data,
            pending: Vec::new(),
            episodes: 0,
            seed,
            steps: 0,
        };
        s.buffer.push(s.shadow.clone());
        Ok(s)
    }

    pub fn buffer(&self) -> &StateBuffer {
        &self.buffer
    }

    fn next_example(&mut self) -> Result<Example> {
        if let Some((dist, store)) = &self.data {
            if self.pending.is_empty() {
                let s = seeds::derive(self.seed, 0xC10E_0000 + self.episodes);
                self.episodes += 1;
                let (_, ep) = dist.sample(store, s)?;
                self.pending = ep.examples;
                self.pending.reverse();
            }
            return Ok(self.pending.pop().expect("episodes are non-empty"));
        }
        let dims = self.widths[0];
        let classes = *self.widths.last().unwrap();
        let x = (0..dims).map(|_| self.rng.sample(rand_distr::StandardNormal)).collect();
        Ok(Example {
            x,
            label: self.rng.gen_range(0..classes),
        })
    }

    /// One online SGD step of the shadow network; its new state enters the buffer.
    pub fn advance(&mut self) -> Result<()> {
        self.steps += 1;
        if self.reset_every > 0 && self.steps % self.reset_every == 0 {
            self.shadow = ShadowNet::init(&self.widths, self.alpha, &mut self.rng);
        }
        let ex = self.next_example()?;
        let tape = self.shadow.forward(&ex.x)?;
        let e = cross_entropy_grad(&softmax(&tape.logits), ex.label);
        let errs = self.shadow.errors(&tape, &e);
        self.shadow.sgd(&tape, &errs);
        self.buffer.push(self.shadow.clone());
        Ok(())
    }

    /// Draw `n` per-cell samples from buffered states. In
    /// [`Stage::DeepSelf`] layer inputs and errors come from the cloned VSML
    /// RNN running `params`.
    pub fn batch(&mut self, params: &MetaParams, n: usize) -> Result<Vec<CloningSample>> {
        let mut out = Vec::with_capacity(n);
        if self.stage == Stage::DeepSelf {
            let net = self.buffer.sample(&mut self.rng).clone();
            let ex = self.next_example()?;
            let cloned = ClonedNet::with_layers(params, net.layers.clone());
            let pass = cloned.forward(&ex.x)?;
            let e = cross_entropy_grad(&softmax(&pass.logits), ex.label);
            let (_, errs) = cloned.backward(&pass, &e)?;
            for _ in 0..n {
                out.push(self.cell_sample(&net, &pass.inputs, &errs));
            }
            return Ok(out);
        }
        for _ in 0..n {
            let net = self.buffer.sample(&mut self.rng).clone();
            let ex = self.next_example()?;
            let tape = net.forward(&ex.x)?;
            let e = cross_entropy_grad(&softmax(&tape.logits), ex.label);
            let errs = net.errors(&tape, &e);
            out.push(self.cell_sample(&net, &tape.inputs, &errs));
        }
        Ok(out)
    }

    fn cell_sample(&mut self, net: &ShadowNet, inputs: &[Vec<f64>], errs: &[Vec<f64>]) -> CloningSample {
        let total: usize = net.layers.iter().map(|l| l.a * l.b).sum();
        let mut k = self.rng.gen_range(0..total);
        let mut l = 0;
        while k >= net.layers[l].a * net.layers[l].b {
            k -= net.layers[l].a * net.layers[l].b;
            l += 1;
        }
        let layer = &net.layers[l];
        let (a, b) = (k / layer.b, k % layer.b);
        CloningSample::new(inputs[l][a], layer.w[k], layer.bias[k], errs[l][b], self.alpha)
    }
}

/// One Adam step on the mean regression loss of `samples`; returns the loss
/// before the update.
pub fn clone_step(
    params: &mut MetaParams,
    adam: &mut AdamState,
    samples: &[CloningSample],
    weights: &LossWeights,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(VsmlError::config("empty cloning batch"));
    }
    let dims = params.dims;
    let p: &MetaParams = params;
    let per: Vec<Result<(f64, Vec<f64>)>> = samples
        .par_iter()
        .map(|s| {
            let mut g = zero_grads(dims);
            let l = sample_loss_grad(p, s, weights, &mut g)?;
            Ok((l, g.to_flat()))
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for r in per {
        let (l, g) = r?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / samples.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    loss *= inv;
    if !loss.is_finite() {
        return Err(VsmlError::NonFinite("cloning regression loss".into()));
    }
    let mut flat = params.to_flat();
    adam.step(&mut flat, &grad)?;
    params.assign_flat(&flat)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneStepLog {
    pub stage: Stage,
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub steps: usize,
    pub final_loss: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct CurriculumReport {
    pub params: MetaParams,
    pub stages: Vec<StageReport>,
    /// Stages left out of the configured order.
    pub skipped: Vec<Stage>,
}

impl CurriculumReport {
    pub fn completed(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }
}

/// Run the configured stages in order. A stage that misses its threshold
/// within budget ends the curriculum; the report says where.
pub fn run_curriculum<F>(
    cfg: &CloningConfig,
    init: MetaParams,
    store: Option<&DataStore>,
    mut on_step: F,
) -> Result<CurriculumReport>
where
    F: FnMut(&CloneStepLog),
{
    cfg.validate()?;
    if init.dims != cfg.dims {
        return Err(VsmlError::config("initial parameters do not match cloning dims"));
    }
    let mut params = init;
    let mut adam = AdamState::new(cfg.adam, params.len());
    let mut reports = Vec::new();
    for (si, &stage) in cfg.stages.iter().enumerate() {
        let mut sampler = CloningSampler::new(cfg, stage, store, seeds::derive(cfg.seed, 0x57A6_0000 + si as u64))?;
        let threshold = cfg.thresholds[stage as usize];
        let budget = cfg.budgets[stage as usize];
        let mut recent: VecDeque<f64> = VecDeque::with_capacity(cfg.window);
        let mut report = StageReport {
            stage,
            steps: 0,
            final_loss: f64::INFINITY,
            threshold,
            passed: false,
        };
        for step in 0..budget {
            adam.config.lr = cfg.adam.lr * cfg.lr_final_fraction.powf(step as f64 / budget.max(1) as f64);
            sampler.advance()?;
            let batch = sampler.batch(&params, cfg.batch_size)?;
            let loss = clone_step(&mut params, &mut adam, &batch, &cfg.loss_weights)?;
            on_step(&CloneStepLog { stage, step, loss });
            if recent.len() == cfg.window {
                recent.pop_front();
            }
            recent.push_back(loss);
            report.steps = step + 1;
            report.final_loss = recent.iter().sum::<f64>() / recent.len() as f64;
            if recent.len() == cfg.window && report.final_loss < threshold {
                report.passed = true;
                break;
            }
        }
        let passed = report.passed;
        reports.push(report);
        if !passed {
            break;
        }
    }
    Ok(CurriculumReport {
        params,
        stages: reports,
        skipped: cfg.skipped_stages(),
    })
}

/// How closely one unrolled update matches the shadow SGD update on fresh samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub samples: usize,
    pub tolerance: f64,
    /// Samples whose `(dw, db)` relative error is below `tolerance`.
    pub within: usize,
    pub median_relative_error: f64,
}

impl Fidelity {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.samples.max(1) as f64
    }
}

/// Measure [`Fidelity`] on `n` samples from a sampler seeded independently
/// of training.
pub fn update_fidelity(
    cfg: &CloningConfig,
    params: &MetaParams,
    stage: Stage,
    store: Option<&DataStore>,
    n: usize,
    tolerance: f64,
    seed: u64,
) -> Result<Fidelity> {
    let mut sampler = CloningSampler::new(cfg, stage, store, seed)?;
    for _ in 0..64 {
        sampler.advance()?;
    }
    let samples = sampler.batch(params, n)?;
    let mut errs = samples
        .par_iter()
        .map(|s| Ok(update_relative_error(&predict(params, s)?, &s.targets)))
        .collect::<Result<Vec<f64>>>()?;
    let within = errs.iter().filter(|&&e| e < tolerance).count();
    errs.sort_by(f64::total_cmp);
    Ok(Fidelity {
        samples: n,
        tolerance,
        within,
        median_relative_error: errs.get(n / 2).copied().unwrap_or(f64::NAN),
    })
}

/// Task used to sanity-check cloned learners: two Gaussian clusters.
pub fn toy_task(dims: usize, episode_length: usize) -> TaskSpec {
    TaskSpec::new(
        Source::Clusters {
            dims,
            classes: 2,
            noise: 0.3,
        },
        episode_length,
    )
}
