//! A common interface over every online learner (VSML and the baselines) and
//! the loop that runs one over an episode.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VsmlError};
use crate::grid::{LayerSpec, StepOutput, VsmlRnn};
use crate::params::Dims;
use crate::tasks::{Episode, MetricTrace, StepRecord};

/// Predicts on `x` first, then learns from `label`.
pub trait OnlineLearner {
    fn step(&mut self, x: &[f64], label: usize) -> Result<StepOutput>;
}

impl OnlineLearner for VsmlRnn<'_> {
    fn step(&mut self, x: &[f64], label: usize) -> Result<StepOutput> {
        self.inner_step(x, Some(label))
    }
}

/// Feed every example of `episode` once. A numeric fault stops the episode
/// and is recorded on the (truncated) trace; other errors propagate.
pub fn run_episode<L: OnlineLearner + ?Sized>(learner: &mut L, episode: &Episode) -> Result<MetricTrace> {
    let mut trace = MetricTrace::default();
    for (step, ex) in episode.examples.iter().enumerate() {
        match learner.step(&ex.x, ex.label) {
            Ok(out) => trace.push(StepRecord {
                step,
                loss: out.loss.unwrap_or(f64::NAN),
                correct: out.predicted == ex.label,
                predicted: out.predicted,
                label: ex.label,
                probs: out.probs,
            }),
            Err(e) if e.is_numeric() => {
                trace.fault = Some(e.at_step(step).to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}

/// Shape of a VSML network; the input and output axes follow the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsmlArch {
    pub dims: Dims,
    /// Widths of hidden message boundaries (empty = single layer).
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default = "two")]
    pub ticks_per_example: usize,
    /// Clip states to `[-c, c]` after each update.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

fn two() -> usize {
    2
}

impl VsmlArch {
    /// Single layer, `N = 16`, `N' = N'' = 8`, two ticks per example, no clipping.
    pub fn scratch() -> Self {
        VsmlArch {
            dims: Dims::scratch(),
            hidden: Vec::new(),
            ticks_per_example: 2,
            clip: None,
        }
    }

    pub fn layer_spec(&self, input_dim: usize, classes: usize) -> Result<LayerSpec> {
        LayerSpec::chain(input_dim, &self.hidden, classes, self.ticks_per_example)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.ticks_per_example == 0 {
            return Err(VsmlError::config("ticks_per_example must be positive"));
        }
        if let Some(c) = self.clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(VsmlError::config("clip bound must be positive"));
            }
        }
        if self.hidden.contains(&0) {
            return Err(VsmlError::config("hidden widths must be positive"));
        }
        Ok(())
    }
}
