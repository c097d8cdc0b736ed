//! Experiment configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::SgdConfig;
use crate::cloning::CloningConfig;
use crate::error::{Result, VsmlError};
use crate::es::EsConfig;
use crate::learner::VsmlArch;
use crate::tasks::{DataStore, TaskDistribution, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MetaTrain,
    MetaTest,
    Clone,
    RunCloned,
    VerifyEquivalence,
    GradCheck,
    Introspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    #[default]
    Vsml,
    MetaRnn,
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Every example shown once.
    #[default]
    FullStream,
    /// Each distinct example shown twice in a row.
    RepeatedPairs,
}

/// Meta-test, run-cloned and introspection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestConfig {
    /// Independent episodes (seeds) to aggregate.
    pub episodes: usize,
    pub episode_length: usize,
    pub protocol: Protocol,
    /// Hidden widths of a cloned learner's network.
    pub cloned_hidden: Vec<usize>,
    /// Replicas whose cloned updates are averaged per step.
    pub cloned_batch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            episodes: 10,
            episode_length: 500,
            protocol: Protocol::FullStream,
            cloned_hidden: Vec::new(),
            cloned_batch: 16,
            task: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub meta_rnn_hidden: usize,
    pub sgd: SgdConfig,
    pub adam: SgdConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            meta_rnn_hidden: 16,
            sgd: SgdConfig::sgd(Vec::new()),
            adam: SgdConfig::adam(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub trials: usize,
    pub max_dim: usize,
    pub grad_instances: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 100,
            max_dim: 3,
            grad_instances: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub learner: LearnerKind,
    #[serde(default = "VsmlArch::scratch")]
    pub arch: VsmlArch,
    #[serde(default)]
    pub es: EsConfig,
    #[serde(default)]
    pub cloning: CloningConfig,
    /// Meta-training distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<TaskDistribution>,
    #[serde(default)]
    pub test: TestConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Write a checkpoint every this many outer steps (0 = only at the end).
    #[serde(default = "fifty")]
    pub checkpoint_every: usize,
    /// Master seed for every stream in the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<std::path::PathBuf>,
}

fn fifty() -> usize {
    50
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            learner: LearnerKind::Vsml,
            arch: VsmlArch::scratch(),
            es: EsConfig::default(),
            cloning: CloningConfig::default(),
            tasks: None,
            test: TestConfig::default(),
            baselines: BaselineConfig::default(),
            verify: VerifyConfig::default(),
            checkpoint_every: 50,
            seed: 0,
            output_dir: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Propagate the master seed into the sub-configurations.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.es.seed = c.seed;
        c.cloning.seed = c.seed;
        c
    }

    /// Full validation; run before any compute.
    pub fn validate(&self, store: &DataStore) -> Result<()> {
        self.arch.validate()?;
        match self.mode {
            Mode::MetaTrain => {
                self.es.validate()?;
                let tasks = self.training_tasks()?;
                tasks.validate(store)?;
                match self.learner {
                    LearnerKind::Vsml | LearnerKind::MetaRnn => {}
                    other => {
                        return Err(VsmlError::config(format!(
                            "learner {other:?} is not meta-trained; use meta-test"
                        )))
                    }
                }
            }
            Mode::MetaTest | Mode::Introspect | Mode::RunCloned => {
                if self.test.episodes == 0 || self.test.episode_length == 0 {
                    return Err(VsmlError::config("test episodes and episode_length must be positive"));
                }
                if let Some(t) = &self.test.task {
                    t.validate(store)?;
                }
                if self.mode == Mode::RunCloned && self.test.cloned_batch == 0 {
                    return Err(VsmlError::config("cloned_batch must be positive"));
                }
            }
            Mode::Clone => self.cloning.validate()?,
            Mode::VerifyEquivalence => {
                if self.verify.trials == 0 || self.verify.max_dim == 0 {
                    return Err(VsmlError::config("verify trials and max_dim must be positive"));
                }
            }
            Mode::GradCheck => {
                if self.verify.grad_instances == 0 {
                    return Err(VsmlError::config("grad_instances must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn training_tasks(&self) -> Result<&TaskDistribution> {
        self.tasks
            .as_ref()
            .ok_or_else(|| VsmlError::config("meta-train needs a `tasks` distribution"))
    }
}
