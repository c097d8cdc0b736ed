use std::sync::Arc;

use super::{Evaluation, FitnessRecord, Objective};
use crate::error::Result;
use crate::grid::VsmlRnn;
use crate::learner::{run_episode, VsmlArch};
use crate::params::MetaParams;
use crate::seeds::{self, tag};
use crate::tasks::{DataStore, MetricTrace, TaskDistribution};

/// Summed online cross-entropy of a VSML RNN over sampled episodes.
#[derive(Debug, Clone)]
pub struct VsmlObjective {
    pub arch: VsmlArch,
    pub tasks: TaskDistribution,
    pub store: Arc<DataStore>,
}

impl VsmlObjective {
    /// Every task is truncated/extended to `episode_length` examples.
    pub fn new(arch: VsmlArch, mut tasks: TaskDistribution, store: Arc<DataStore>, episode_length: usize) -> Result<Self> {
        arch.validate()?;
        for t in &mut tasks.tasks {
            t.task.episode_length = episode_length;
        }
        tasks.validate(&store)?;
        Ok(VsmlObjective { arch, tasks, store })
    }

    /// Run one episode and return its full trace. A divergent episode comes
    /// back truncated with `fault` set.
    pub fn trace(&self, params: &MetaParams, episode_seed: u64) -> Result<MetricTrace> {
        let (_, episode) = self.tasks.sample(&self.store, episode_seed)?;
        let spec = self.arch.layer_spec(episode.input_dim, episode.num_classes)?;
        let mut net = VsmlRnn::new(params, spec, seeds::derive(episode_seed, tag::STATES))?.with_clip(self.arch.clip);
        run_episode(&mut net, &episode)
    }
}

impl Objective for VsmlObjective {
    fn dim(&self) -> usize {
        self.arch.dims.param_count()
    }

    fn evaluate(&self, theta: &[f64], episode_seed: u64) -> Evaluation {
        let failed = Evaluation {
            loss: f64::NAN,
            accuracy: f64::NAN,
        };
        let Ok(params) = MetaParams::from_flat(self.arch.dims, theta) else {
            return failed;
        };
        match self.trace(&params, episode_seed) {
            Ok(t) if t.fault.is_none() => Evaluation {
                loss: t.total_loss(),
                accuracy: t.final_accuracy(),
            },
            _ => failed,
        }
    }
}

/// Evaluate one parameter vector on the episode drawn for `episode_seed`.
/// Divergence is reported on the record, never raised.
pub fn evaluate_member(objective: &dyn Objective, member: usize, theta: &[f64], episode_seed: u64) -> FitnessRecord {
    let ev = objective.evaluate(theta, episode_seed);
    FitnessRecord {
        member,
        noise_index: member,
        sign: 1.0,
        episode_seed,
        loss: ev.loss,
        accuracy: ev.accuracy,
        diverged: !ev.loss.is_finite(),
    }
}
