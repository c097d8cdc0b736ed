use std::sync::Arc;

use rand::Rng;

use crate::error::{check_len, Result, VsmlError};
use crate::es::{Evaluation, Objective};
use crate::grid::StepOutput;
use crate::learner::{run_episode, OnlineLearner};
use crate::lstm::{apply_gates, gate_preactivations, matvec_acc};
use crate::params::{Dims, Gate, LstmCellParams};
use crate::tasks::{DataStore, MetricTrace, TaskDistribution};

/// A single LSTM reading `[padded x, previous error]` with a linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaRnnParams {
    pub input_dim: usize,
    pub classes: usize,
    pub hidden: usize,
    pub cell: LstmCellParams,
    /// `classes x hidden`.
    pub readout: Vec<f64>,
    pub readout_bias: Vec<f64>,
}

impl MetaRnnParams {
    /// The cell viewed through [`Dims`]: `nf` = image width, `nb` = error width.
    pub fn dims(&self) -> Dims {
        Dims::new(self.hidden, self.input_dim, self.classes)
    }

    pub fn zeros(input_dim: usize, classes: usize, hidden: usize) -> Self {
        let dims = Dims::new(hidden, input_dim, classes);
        MetaRnnParams {
            input_dim,
            classes,
            hidden,
            cell: LstmCellParams::zeros(dims),
            readout: vec![0.0; classes * hidden],
            readout_bias: vec![0.0; classes],
        }
    }

    /// Same scheme as the VSML meta variables: uniform `1/sqrt(fan_in)`,
    /// forget bias `+1`.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, classes: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = MetaRnnParams::zeros(input_dim, classes, hidden);
        let g = 1.0 / ((input_dim + classes + hidden) as f64).sqrt();
        for v in p
            .cell
            .input_weights
            .iter_mut()
            .chain(&mut p.cell.recurrent_weights)
            .chain(&mut p.cell.biases)
        {
            *v = rng.gen_range(-g..=g);
        }
        let r = 1.0 / (hidden as f64).sqrt();
        for v in p.readout.iter_mut().chain(&mut p.readout_bias) {
            *v = rng.gen_range(-r..=r);
        }
        p.cell.bias_block_mut(Gate::Forget, hidden).fill(1.0);
        p
    }

    pub fn param_count(&self) -> usize {
        Self::count(self.input_dim, self.classes, self.hidden)
    }

    pub fn count(input_dim: usize, classes: usize, hidden: usize) -> usize {
        4 * hidden * (input_dim + classes) + 4 * hidden * hidden + 4 * hidden + classes * hidden + classes
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [
            self.cell.input_weights.as_slice(),
            &self.cell.recurrent_weights,
            &self.cell.biases,
            &self.readout,
            &self.readout_bias,
        ]
        .concat()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("meta rnn parameters", self.param_count(), flat.len())?;
        let mut off = 0;
        for block in [
            &mut self.cell.input_weights,
            &mut self.cell.recurrent_weights,
            &mut self.cell.biases,
            &mut self.readout,
            &mut self.readout_bias,
        ] {
            let n = block.len();
            block.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

/// Online learner state for one episode.
#[derive(Debug, Clone)]
pub struct MetaRnnLearner<'p> {
    params: &'p MetaRnnParams,
    classes: usize,
    z: Vec<f64>,
    h: Vec<f64>,
    x: Vec<f64>,
    prev_error: Vec<f64>,
    pre: Vec<f64>,
}

impl<'p> MetaRnnLearner<'p> {
    /// `classes` is the class count of the current task (at most the
    /// readout width); only that many logits are used.
    pub fn new(params: &'p MetaRnnParams, input_dim: usize, classes: usize) -> Result<Self> {
        if input_dim > params.input_dim || classes > params.classes || classes < 2 {
            return Err(VsmlError::config(format!(
                "meta RNN built for {} inputs / {} classes cannot take {} / {}",
                params.input_dim, params.classes, input_dim, classes
            )));
        }
        let h = params.hidden;
        Ok(MetaRnnLearner {
            params,
            classes,
            z: vec![0.0; h],
            h: vec![0.0; h],
            x: vec![0.0; params.input_dim],
            prev_error: vec![0.0; params.classes],
            pre: vec![0.0; 4 * h],
        })
    }
}

impl OnlineLearner for MetaRnnLearner<'_> {
    fn step(&mut self, x: &[f64], label: usize) -> Result<StepOutput> {
        if x.len() > self.x.len() {
            return Err(VsmlError::config("input wider than the meta RNN"));
        }
        if label >= self.classes {
            return Err(VsmlError::Dimension {
                what: "label (class count)",
                expected: self.classes,
                actual: label + 1,
            });
        }
        self.x.fill(0.0);
        self.x[..x.len()].copy_from_slice(x);
        let p = self.params;
        gate_preactivations(&p.cell, p.dims(), &self.h, &self.x, &self.prev_error, &mut self.pre);
        let z_prev = self.z.clone();
        apply_gates(&mut self.pre, &z_prev, &mut self.z, &mut self.h);
        if self.z.iter().chain(&self.h).any(|v| !v.is_finite()) {
            return Err(VsmlError::NonFinite("meta RNN state".into()));
        }
        let mut logits = p.readout_bias.clone();
        matvec_acc(&p.readout, &self.h, &mut logits);
        logits.truncate(self.classes);
        let out = StepOutput::from_logits(logits, Some(label));
        self.prev_error.fill(0.0);
        if let Some(e) = &out.error {
            self.prev_error[..e.len()].copy_from_slice(e);
        }
        Ok(out)
    }
}

/// ES objective for the Meta RNN, on the same episodes a
/// [`crate::es::VsmlObjective`] with the same seeds would see.
#[derive(Debug, Clone)]
pub struct MetaRnnObjective {
    pub template: MetaRnnParams,
    pub tasks: TaskDistribution,
    pub store: Arc<DataStore>,
}

impl MetaRnnObjective {
    pub fn new(hidden: usize, mut tasks: TaskDistribution, store: Arc<DataStore>, episode_length: usize) -> Result<Self> {
        for t in &mut tasks.tasks {
            t.task.episode_length = episode_length;
        }
        tasks.validate(&store)?;
        let template = MetaRnnParams::zeros(tasks.max_input_dim(&store)?, tasks.max_classes(&store)?, hidden);
        Ok(MetaRnnObjective { template, tasks, store })
    }

    pub fn trace(&self, params: &MetaRnnParams, episode_seed: u64) -> Result<MetricTrace> {
        let (_, ep) = self.tasks.sample(&self.store, episode_seed)?;
        let mut learner = MetaRnnLearner::new(params, ep.input_dim, ep.num_classes)?;
        run_episode(&mut learner, &ep)
    }
}

impl Objective for MetaRnnObjective {
    fn dim(&self) -> usize {
        self.template.param_count()
    }

    fn evaluate(&self, theta: &[f64], episode_seed: u64) -> Evaluation {
        let failed = Evaluation {
            loss: f64::NAN,
            accuracy: f64::NAN,
        };
        let mut p = self.template.clone();
        if p.assign_flat(theta).is_err() {
            return failed;
        }
        match self.trace(&p, episode_seed) {
            Ok(t) if t.fault.is_none() => Evaluation {
                loss: t.total_loss(),
                accuracy: t.final_accuracy(),
            },
            _ => failed,
        }
    }
}
