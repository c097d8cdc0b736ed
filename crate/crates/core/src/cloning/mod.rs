//! Learning algorithm cloning: regress the shared LSTM so that a VSML RNN
//! computes `y = tanh(x) w + b` in its forward sweep and applies online
//! backprop to `(w, b)` in its backward sweep.
//!
//! Slot conventions: the forward message carries `x` (and `y-hat` on the way
//! out) in slot 0, the backward message carries `e` (and `e-hat'`) in slot 0,
//! and the cell state keeps `w / 4` in `z[0]` and `b / 4` in `z[1]`. Every
//! sweep starts from the canonical state `z = (w/4, b/4, 0, ...)`, `h = 0` and
//! runs [`SWEEP_TICKS`] ticks; only the two designated slots survive a
//! backward sweep.

mod learner;
mod shadow;
mod train;

pub use learner::{run_cloned_learner, ClonedNet};
pub use shadow::{ShadowLayer, ShadowNet, ShadowTape};
pub use train::{
    clone_step, run_curriculum, toy_task, update_fidelity, CloneStepLog, CloningConfig, CloningSampler,
    CurriculumReport, Fidelity, Stage, StageReport, StateBuffer,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grad::cell::{backward_lstm_cell, backward_projection, forward_cell, CellTape};
use crate::params::{Dims, MetaParams};

/// Stored state slot = true value / 4.
pub const STATE_SCALE: f64 = 4.0;
/// Shadow SGD learning rate used for target generation.
pub const SHADOW_LR: f64 = 0.01;
/// State clipping bound of the cloned learner.
pub const CLIP: f64 = 4.0;
/// LSTM ticks per sweep.
pub const SWEEP_TICKS: usize = 2;

/// Regression targets for one sub-RNN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneTargets {
    pub y: f64,
    pub dw: f64,
    pub db: f64,
    pub e_prev: f64,
}

/// `y = tanh(x) w + b`, `dw = -alpha e tanh(x)`, `db = -alpha e`,
/// `e' = e w (1 - tanh(x)^2)`.
pub fn make_targets(x: f64, w: f64, b: f64, e: f64, alpha: f64) -> CloneTargets {
    let t = x.tanh();
    CloneTargets {
        y: t * w + b,
        dw: -alpha * e * t,
        db: -alpha * e,
        e_prev: e * w * (1.0 - t * t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloningSample {
    pub x: f64,
    pub w: f64,
    pub b: f64,
    pub e: f64,
    pub targets: CloneTargets,
}

impl CloningSample {
    pub fn new(x: f64, w: f64, b: f64, e: f64, alpha: f64) -> Self {
        CloningSample {
            x,
            w,
            b,
            e,
            targets: make_targets(x, w, b, e, alpha),
        }
    }
}

/// What the VSML RNN produces for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClonePrediction {
    pub y: f64,
    pub dw: f64,
    pub db: f64,
    pub e_prev: f64,
}

/// Per-target weights of the regression loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub y: f64,
    pub dw: f64,
    pub db: f64,
    pub e_prev: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            y: 1.0,
            dw: 1.0,
            db: 1.0,
            e_prev: 1.0,
        }
    }
}

pub fn encode(v: f64) -> f64 {
    v / STATE_SCALE
}

pub fn decode(s: f64) -> f64 {
    s * STATE_SCALE
}

fn slot0(len: usize, v: f64) -> Vec<f64> {
    let mut m = vec![0.0; len];
    m[0] = v;
    m
}

fn run_ticks(params: &MetaParams, w: f64, b: f64, fwd: &[f64], bwd: &[f64]) -> Result<Vec<CellTape>> {
    let dims = params.dims;
    let mut z = vec![0.0; dims.n];
    z[0] = encode(w);
    z[1] = encode(b);
    let mut h = vec![0.0; dims.n];
    let mut tapes = Vec::with_capacity(SWEEP_TICKS);
    for _ in 0..SWEEP_TICKS {
        let t = forward_cell(&params.cell, dims, &z, &h, fwd, bwd)?;
        z.clone_from(&t.z);
        h.clone_from(&t.h);
        tapes.push(t);
    }
    Ok(tapes)
}

/// Forward sweep of one sub-RNN: `y-hat`.
pub fn forward_sweep(params: &MetaParams, x: f64, w: f64, b: f64) -> Result<f64> {
    let tapes = forward_tapes(params, x, w, b)?;
    Ok(read_slot0(&params.proj.forward, &tapes[SWEEP_TICKS - 1].h))
}

/// Backward sweep of one sub-RNN: updated `(w, b)` and `e-hat'`.
pub fn backward_sweep(params: &MetaParams, x: f64, w: f64, b: f64, e: f64) -> Result<(f64, f64, f64)> {
    let tapes = backward_tapes(params, x, w, b, e)?;
    let last = &tapes[SWEEP_TICKS - 1];
    Ok((decode(last.z[0]), decode(last.z[1]), read_slot0(&params.proj.backward, &last.h)))
}

fn forward_tapes(params: &MetaParams, x: f64, w: f64, b: f64) -> Result<Vec<CellTape>> {
    let d = params.dims;
    run_ticks(params, w, b, &slot0(d.nf, x), &vec![0.0; d.nb])
}

fn backward_tapes(params: &MetaParams, x: f64, w: f64, b: f64, e: f64) -> Result<Vec<CellTape>> {
    let d = params.dims;
    run_ticks(params, w, b, &slot0(d.nf, x), &slot0(d.nb, e))
}

fn read_slot0(proj: &[f64], h: &[f64]) -> f64 {
    proj[..h.len()].iter().zip(h).map(|(a, b)| a * b).sum()
}

pub fn predict(params: &MetaParams, s: &CloningSample) -> Result<ClonePrediction> {
    let y = forward_sweep(params, s.x, s.w, s.b)?;
    let (w2, b2, e_prev) = backward_sweep(params, s.x, s.w, s.b, s.e)?;
    Ok(ClonePrediction {
        y,
        dw: w2 - s.w,
        db: b2 - s.b,
        e_prev,
    })
}

/// `sum_k weight_k (pred_k - target_k)^2 / 4` for one sample; parameter
/// gradients are accumulated into `grads`.
pub fn sample_loss_grad(
    params: &MetaParams,
    s: &CloningSample,
    weights: &LossWeights,
    grads: &mut MetaParams,
) -> Result<f64> {
    let dims: Dims = params.dims;
    let t = &s.targets;
    let ft = forward_tapes(params, s.x, s.w, s.b)?;
    let bt = backward_tapes(params, s.x, s.w, s.b, s.e)?;
    let y = read_slot0(&params.proj.forward, &ft[SWEEP_TICKS - 1].h);
    let last = &bt[SWEEP_TICKS - 1];
    let dw = decode(last.z[0]) - s.w;
    let db = decode(last.z[1]) - s.b;
    let e_prev = read_slot0(&params.proj.backward, &last.h);

    let ry = y - t.y;
    let rw = dw - t.dw;
    let rb = db - t.db;
    let re = e_prev - t.e_prev;
    let loss = 0.25 * (weights.y * ry * ry + weights.dw * rw * rw + weights.db * rb * rb + weights.e_prev * re * re);

    // forward sweep: only y-hat depends on it
    let mut dm = vec![0.0; dims.nf];
    dm[0] = 0.5 * weights.y * ry;
    let dh = backward_projection(&params.proj.forward, &ft[SWEEP_TICKS - 1].h, &dm, &mut grads.proj.forward);
    backprop_ticks(params, &ft, vec![0.0; dims.n], dh, grads)?;

    let mut dm = vec![0.0; dims.nb];
    dm[0] = 0.5 * weights.e_prev * re;
    let dh = backward_projection(&params.proj.backward, &last.h, &dm, &mut grads.proj.backward);
    let mut dz = vec![0.0; dims.n];
    dz[0] = 0.5 * weights.dw * rw * STATE_SCALE;
    dz[1] = 0.5 * weights.db * rb * STATE_SCALE;
    backprop_ticks(params, &bt, dz, dh, grads)?;
    Ok(loss)
}

fn backprop_ticks(params: &MetaParams, tapes: &[CellTape], mut dz: Vec<f64>, mut dh: Vec<f64>, grads: &mut MetaParams) -> Result<()> {
    for tape in tapes.iter().rev() {
        let g = backward_lstm_cell(&params.cell, tape, &dz, &dh, &mut grads.cell)?;
        dz = g.z_prev;
        dh = g.h_prev;
    }
    Ok(())
}

/// Mean regression loss over `samples` without gradients.
pub fn regression_loss(params: &MetaParams, samples: &[CloningSample], weights: &LossWeights) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let p = predict(params, s)?;
        let t = &s.targets;
        total += 0.25
            * (weights.y * (p.y - t.y).powi(2)
                + weights.dw * (p.dw - t.dw).powi(2)
                + weights.db * (p.db - t.db).powi(2)
                + weights.e_prev * (p.e_prev - t.e_prev).powi(2));
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Relative error of the predicted `(dw, db)` update against the shadow SGD
/// update, as vectors.
pub fn update_relative_error(p: &ClonePrediction, t: &CloneTargets) -> f64 {
    let num = ((p.dw - t.dw).powi(2) + (p.db - t.db).powi(2)).sqrt();
    let den = (t.dw * t.dw + t.db * t.db).sqrt();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}
