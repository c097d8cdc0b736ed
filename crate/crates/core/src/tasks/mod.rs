//! Task sources and augmentations, plus the online episode protocol shared
//! by every learner.

pub mod augment;
pub mod dataset;
pub mod idx;
pub mod metrics;
pub mod stream;
pub mod synthetic;

pub use dataset::{DataStore, RawDataset, Split};
pub use metrics::{cumulative_accuracy, MetricTrace, StepRecord};
pub use stream::{AugmentSeed, Episode, Source, TaskDistribution, TaskSpec, WeightedTask};

/// One labelled input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub label: usize,
}
