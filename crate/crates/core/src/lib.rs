//! Variable-shared meta learning: grids of tiny parameter-shared LSTMs whose
//! states act as the weights of a learned network.

pub mod baselines;
pub mod checkpoint;
pub mod cloning;
pub mod error;
pub mod equivalence;
pub mod es;
pub mod grad;
pub mod grid;
pub mod harness;
pub mod learner;
pub mod loss;
pub mod lstm;
pub mod params;
pub mod seeds;
pub mod tasks;

pub use error::{Result, VsmlError};
pub use grid::{LayerSpec, SubRnnGrid, VsmlRnn};
pub use params::{Dims, MetaParams};
