use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VsmlError};
use crate::grad::{AdamConfig, AdamState, DenseNet};
use crate::grid::StepOutput;
use crate::learner::OnlineLearner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Hidden widths; empty is the shallow network.
    #[serde(default)]
    pub hidden: Vec<usize>,
}

impl SgdConfig {
    /// Plain SGD, learning rate `1e-2`.
    pub fn sgd(hidden: Vec<usize>) -> Self {
        SgdConfig {
            optimizer: OptimizerKind::Sgd,
            lr: 1e-2,
            hidden,
        }
    }

    /// Adam, learning rate `1e-3`.
    pub fn adam(hidden: Vec<usize>) -> Self {
        SgdConfig {
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            hidden,
        }
    }

    /// The deep variant uses one hidden layer of 160 units.
    pub fn deep(mut self) -> Self {
        self.hidden = vec![160];
        self
    }
}

/// Online (batch size one) gradient descent on a dense tanh network.
#[derive(Debug, Clone)]
pub struct SgdLearner {
    pub net: DenseNet,
    pub config: SgdConfig,
    adam: Option<AdamState>,
    flat: Vec<f64>,
}

impl SgdLearner {
    pub fn new(config: SgdConfig, input_dim: usize, classes: usize, seed: u64) -> Result<Self> {
        if !(config.lr.is_finite() && config.lr >= 0.0) {
            return Err(VsmlError::config("learning rate must be finite and non-negative"));
        }
        let mut widths = vec![input_dim];
        widths.extend_from_slice(&config.hidden);
        widths.push(classes);
        if widths.contains(&0) {
            return Err(VsmlError::config("network widths must be positive"));
        }
        let net = DenseNet::init(&widths, &mut ChaCha8Rng::seed_from_u64(seed));
        let flat = net.to_flat();
        let adam = match config.optimizer {
            OptimizerKind::Adam => Some(AdamState::new(AdamConfig::with_lr(config.lr), flat.len())),
            OptimizerKind::Sgd => None,
        };
        Ok(SgdLearner { net, config, adam, flat })
    }
}

impl OnlineLearner for SgdLearner {
    fn step(&mut self, x: &[f64], label: usize) -> Result<StepOutput> {
        if label >= self.net.output_dim() {
            return Err(VsmlError::Dimension {
                what: "label (class count)",
                expected: self.net.output_dim(),
                actual: label + 1,
            });
        }
        let tape = self.net.forward(x)?;
        let out = StepOutput::from_logits(tape.logits().to_vec(), Some(label));
        let e = out.error.as_ref().expect("label given");
        let mut g = self.net.zeros_like();
        self.net.backward(&tape, e, &mut g)?;
        let grad = g.to_flat();
        match &mut self.adam {
            Some(adam) => adam.step(&mut self.flat, &grad)?,
            None => {
                if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
                    return Err(VsmlError::NonFinite(format!("gradient entry {i}")));
                }
                let lr = self.config.lr;
                self.flat.iter_mut().zip(&grad).for_each(|(p, g)| *p -= lr * g);
            }
        }
        self.net.assign_flat(&self.flat)?;
        Ok(out)
    }
}
