//! Hand-written reverse-mode gradients, a finite-difference verifier and Adam.

pub mod adam;
pub mod cell;
pub mod dense;
pub mod fd;


pub use adam::{adam_step, AdamConfig, AdamState};
pub use cell::{backward_lstm_cell, backward_projection, forward_cell, project, CellInputGrads, CellTape};
pub use dense::{DenseLayer, DenseNet, DenseTape};
pub use fd::{fd_check, numeric_grad, relative_error};

pub mod suite;

pub use suite::{run_suite, GradCheck, GRAD_TOLERANCE};
