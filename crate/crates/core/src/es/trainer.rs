use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{es_gradient, evaluate_population, EsConfig, FitnessRecord, Objective};
use crate::error::{check_len, Result, VsmlError};
use crate::grad::AdamState;

/// Everything needed to continue an ES run bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsCheckpointState {
    /// Number of completed outer steps.
    pub step: usize,
    pub theta: Vec<f64>,
    pub adam: AdamState,
}

/// Summary of one outer step. `wall_time_s` is kept out of the CSV row so
/// that logs of identical runs compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterStepLog {
    pub step: usize,
    pub mean_loss: f64,
    pub best_loss: f64,
    pub mean_cum_acc: f64,
    pub diverged: usize,
    pub wall_time_s: f64,
}

impl OuterStepLog {
    pub const CSV_HEADER: &'static str = "step,mean_loss,best_loss,mean_cum_acc,diverged";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.step, self.mean_loss, self.best_loss, self.mean_cum_acc, self.diverged
        )
    }

    fn summarize(step: usize, records: &[FitnessRecord]) -> Self {
        let ok: Vec<&FitnessRecord> = records.iter().filter(|r| !r.diverged).collect();
        let n = ok.len().max(1) as f64;
        OuterStepLog {
            step,
            mean_loss: ok.iter().map(|r| r.loss).sum::<f64>() / n,
            best_loss: ok.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min),
            mean_cum_acc: ok.iter().map(|r| r.accuracy).sum::<f64>() / n,
            diverged: records.len() - ok.len(),
            wall_time_s: 0.0,
        }
    }
}

/// Meta-trains a flat parameter vector against an [`Objective`].
pub struct MetaTrainer<O> {
    pub config: EsConfig,
    pub objective: O,
    state: EsCheckpointState,
}

impl<O: Objective> MetaTrainer<O> {
    pub fn new(config: EsConfig, objective: O, theta0: Vec<f64>) -> Result<Self> {
        config.validate()?;
        check_len("initial meta parameters", objective.dim(), theta0.len())?;
        let adam = AdamState::new(config.adam, theta0.len());
        Ok(MetaTrainer {
            config,
            objective,
            state: EsCheckpointState {
                step: 0,
                theta: theta0,
                adam,
            },
        })
    }

    /// Continue from a saved state.
    pub fn resume(config: EsConfig, objective: O, state: EsCheckpointState) -> Result<Self> {
        config.validate()?;
        check_len("checkpoint meta parameters", objective.dim(), state.theta.len())?;
        check_len("checkpoint optimizer state", state.theta.len(), state.adam.m.len())?;
        check_len("checkpoint optimizer state", state.theta.len(), state.adam.v.len())?;
        if state.adam.config != config.adam {
            return Err(VsmlError::config("checkpoint optimizer settings differ from config"));
        }
        Ok(MetaTrainer { config, objective, state })
    }

    pub fn state(&self) -> &EsCheckpointState {
        &self.state
    }

    pub fn theta(&self) -> &[f64] {
        &self.state.theta
    }

    pub fn step_index(&self) -> usize {
        self.state.step
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.config.outer_steps
    }

    /// One outer step: evaluate the population, estimate the gradient, apply Adam.
    pub fn step(&mut self) -> Result<OuterStepLog> {
        let started = Instant::now();
        let step = self.state.step;
        let records = evaluate_population(&self.config, &self.state.theta, step, &self.objective);
        let grad = es_gradient(&self.config, step, &records, self.state.theta.len())?;
        self.state.adam.step(&mut self.state.theta, &grad)?;
        self.state.step += 1;
        let mut log = OuterStepLog::summarize(step, &records);
        log.wall_time_s = started.elapsed().as_secs_f64();
        Ok(log)
    }

    /// Step until `outer_steps` is reached, calling `on_step` after each one.
    pub fn run<F>(&mut self, mut on_step: F) -> Result<()>
    where
        F: FnMut(&OuterStepLog, &EsCheckpointState) -> Result<()>,
    {
        while !self.is_done() {
            let log = self.step()?;
            on_step(&log, &self.state)?;
        }
        Ok(())
    }
}
