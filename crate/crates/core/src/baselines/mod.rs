//! Comparison learners: a plain Meta RNN and online SGD / Adam on dense tanh
//! networks.

mod meta_rnn;
mod sgd;

pub use meta_rnn::{MetaRnnLearner, MetaRnnObjective, MetaRnnParams};
pub use sgd::{OptimizerKind, SgdConfig, SgdLearner};
