//! Versioned JSON checkpoints of meta parameters (and optionally optimizer
//! state). Floats are written in shortest round-trip form, so
//! save -> load -> save reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::MetaRnnParams;
use crate::error::{Result, VsmlError};
use crate::es::EsCheckpointState;
use crate::grad::AdamState;
use crate::grid::LayerSpec;
use crate::learner::VsmlArch;
use crate::params::{Dims, MetaParams, BLOCK_NAMES};

pub const CHECKPOINT_VERSION: u32 = 1;

const META_RNN_BLOCKS: [&str; 5] = [
    "lstm_input_weights",
    "lstm_recurrent_weights",
    "lstm_biases",
    "readout_weights",
    "readout_biases",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Vsml,
    MetaRnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedBlock {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedMeta {
    pub seed: u64,
    /// Outer or cloning steps completed when this was written.
    pub step: usize,
}

/// Optimizer state needed to resume training exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerState {
    pub step: usize,
    pub adam: AdamState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelKind,
    /// For the Meta RNN: `N` = hidden size, `Nf` = input width, `Nb` = classes.
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch: Option<VsmlArch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_spec: Option<LayerSpec>,
    pub blocks: Vec<NamedBlock>,
    pub seeds: SeedMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerState>,
}

fn named(names: &[&str], blocks: &[&[f64]]) -> Vec<NamedBlock> {
    names
        .iter()
        .zip(blocks)
        .map(|(n, b)| NamedBlock {
            name: n.to_string(),
            values: b.to_vec(),
        })
        .collect()
}

impl Checkpoint {
    pub fn from_vsml(params: &MetaParams, arch: Option<VsmlArch>, seeds: SeedMeta) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            model: ModelKind::Vsml,
            dims: params.dims,
            arch,
            layer_spec: None,
            blocks: named(&BLOCK_NAMES, &params.blocks()),
            seeds,
            optimizer: None,
        }
    }

    pub fn from_meta_rnn(params: &MetaRnnParams, seeds: SeedMeta) -> Self {
        let c = &params.cell;
        Checkpoint {
            version: CHECKPOINT_VERSION,
            model: ModelKind::MetaRnn,
            dims: params.dims(),
            arch: None,
            layer_spec: None,
            blocks: named(
                &META_RNN_BLOCKS,
                &[&c.input_weights, &c.recurrent_weights, &c.biases, &params.readout, &params.readout_bias],
            ),
            seeds,
            optimizer: None,
        }
    }

    pub fn with_optimizer(mut self, state: &EsCheckpointState) -> Self {
        self.optimizer = Some(OptimizerState {
            step: state.step,
            adam: state.adam.clone(),
        });
        self
    }

    pub fn with_layer_spec(mut self, spec: LayerSpec) -> Self {
        self.layer_spec = Some(spec);
        self
    }

    fn take_blocks(&self, names: &[&str]) -> Result<[Vec<f64>; 5]> {
        if self.blocks.len() != names.len() {
            return Err(VsmlError::config(format!(
                "checkpoint has {} blocks, expected {}",
                self.blocks.len(),
                names.len()
            )));
        }
        let mut out: [Vec<f64>; 5] = Default::default();
        for (slot, name) in out.iter_mut().zip(names) {
            let b = self
                .blocks
                .iter()
                .find(|b| b.name == *name)
                .ok_or_else(|| VsmlError::config(format!("checkpoint is missing block {name}")))?;
            *slot = b.values.clone();
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(VsmlError::config(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if let Some(arch) = &self.arch {
            if arch.dims != self.dims {
                return Err(VsmlError::config("checkpoint arch dims disagree with dims"));
            }
        }
        Ok(())
    }

    pub fn vsml_params(&self) -> Result<MetaParams> {
        self.validate()?;
        if self.model != ModelKind::Vsml {
            return Err(VsmlError::config("checkpoint does not hold VSML meta parameters"));
        }
        MetaParams::from_blocks(self.dims, self.take_blocks(&BLOCK_NAMES)?)
    }

    pub fn meta_rnn_params(&self) -> Result<MetaRnnParams> {
        self.validate()?;
        if self.model != ModelKind::MetaRnn {
            return Err(VsmlError::config("checkpoint does not hold Meta RNN parameters"));
        }
        let d = self.dims;
        let mut p = MetaRnnParams::zeros(d.nf, d.nb, d.n);
        p.assign_flat(&self.take_blocks(&META_RNN_BLOCKS)?.concat())?;
        if p.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(VsmlError::NonFinite("meta RNN checkpoint".into()));
        }
        Ok(p)
    }

    /// Flat parameter vector in block order.
    pub fn flat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }
}
