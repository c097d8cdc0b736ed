//! The finite-difference verifier suite behind `grad-check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::cell::{backward_lstm_cell, backward_projection, forward_cell, project, zero_grads};
use super::dense::DenseNet;
use super::fd::fd_check;
use crate::cloning::{sample_loss_grad, CloningSample, LossWeights, ShadowLayer};
use crate::error::Result;
use crate::loss::{cross_entropy, cross_entropy_grad, softmax};
use crate::params::{Dims, LstmCellParams, MetaParams};

/// Relative tolerance every check must meet.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub operation: &'static str,
    pub instances: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

fn vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_params<R: Rng>(rng: &mut R, dims: Dims) -> MetaParams {
    let mut p = MetaParams::init(dims, rng);
    // spread values past the init range so saturation regimes are covered
    let flat: Vec<f64> = p.to_flat().iter().map(|v| v * rng.gen_range(0.5..3.0)).collect();
    p.assign_flat(&flat).expect("same length");
    p
}

fn cell_from_flat(dims: Dims, flat: &[f64]) -> LstmCellParams {
    let p = MetaParams::from_flat(dims, &[flat, &vec![0.0; dims.nf * dims.n + dims.nb * dims.n]].concat())
        .expect("cell block prefix");
    p.cell
}

fn cell_flat(c: &LstmCellParams) -> Vec<f64> {
    [c.input_weights.as_slice(), &c.recurrent_weights, &c.biases].concat()
}

/// LSTM cell: gradients w.r.t. parameters and all four inputs.
fn check_lstm_cell(rng: &mut ChaCha8Rng) -> Result<f64> {
    let dims = Dims::new(3, 2, 2);
    let p = random_params(rng, dims);
    let (z, h, f, b) = (vec(rng, 3, 2.0), vec(rng, 3, 1.0), vec(rng, 2, 2.0), vec(rng, 2, 2.0));
    let (cz, ch) = (vec(rng, 3, 1.0), vec(rng, 3, 1.0));
    let objective = |cell: &LstmCellParams, z: &[f64], h: &[f64], f: &[f64], b: &[f64]| -> f64 {
        let t = forward_cell(cell, dims, z, h, f, b).expect("shapes");
        t.z.iter().zip(&cz).map(|(a, c)| a * c).sum::<f64>() + t.h.iter().zip(&ch).map(|(a, c)| a * c).sum::<f64>()
    };
    let tape = forward_cell(&p.cell, dims, &z, &h, &f, &b)?;
    let mut g = LstmCellParams::zeros(dims);
    let gi = backward_lstm_cell(&p.cell, &tape, &cz, &ch, &mut g)?;

    let theta = cell_flat(&p.cell);
    let mut worst = fd_check(|t| objective(&cell_from_flat(dims, t), &z, &h, &f, &b), &theta, &cell_flat(&g));
    worst = worst.max(fd_check(|v| objective(&p.cell, v, &h, &f, &b), &z, &gi.z_prev));
    worst = worst.max(fd_check(|v| objective(&p.cell, &z, v, &f, &b), &h, &gi.h_prev));
    worst = worst.max(fd_check(|v| objective(&p.cell, &z, &h, v, &b), &f, &gi.fwd_in));
    worst = worst.max(fd_check(|v| objective(&p.cell, &z, &h, &f, v), &b, &gi.bwd_in));
    Ok(worst)
}

/// Three chained cell steps followed by both projections.
fn check_lstm_unroll(rng: &mut ChaCha8Rng) -> Result<f64> {
    let dims = Dims::new(3, 2, 2);
    let p = random_params(rng, dims);
    let z0 = vec(rng, 3, 1.0);
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = (0..3).map(|_| (vec(rng, 2, 2.0), vec(rng, 2, 2.0))).collect();
    let (cf, cb) = (vec(rng, 2, 1.0), vec(rng, 2, 1.0));
    let objective = |p: &MetaParams| -> f64 {
        let (mut z, mut h) = (z0.clone(), vec![0.0; 3]);
        for (f, b) in &inputs {
            let t = forward_cell(&p.cell, dims, &z, &h, f, b).expect("shapes");
            z = t.z;
            h = t.h;
        }
        let mf = project(&p.proj.forward, &h);
        let mb = project(&p.proj.backward, &h);
        mf.iter().zip(&cf).map(|(a, c)| a * c).sum::<f64>() + mb.iter().zip(&cb).map(|(a, c)| a * c).sum::<f64>()
    };
    let mut tapes = Vec::new();
    let (mut z, mut h) = (z0.clone(), vec![0.0; 3]);
    for (f, b) in &inputs {
        let t = forward_cell(&p.cell, dims, &z, &h, f, b)?;
        z = t.z.clone();
        h = t.h.clone();
        tapes.push(t);
    }
    let mut g = zero_grads(dims);
    let mut dh = backward_projection(&p.proj.forward, &h, &cf, &mut g.proj.forward);
    let dhb = backward_projection(&p.proj.backward, &h, &cb, &mut g.proj.backward);
    dh.iter_mut().zip(&dhb).for_each(|(a, b)| *a += b);
    let mut dz = vec![0.0; 3];
    for t in tapes.iter().rev() {
        let gi = backward_lstm_cell(&p.cell, t, &dz, &dh, &mut g.cell)?;
        dz = gi.z_prev;
        dh = gi.h_prev;
    }
    Ok(fd_check(
        |t| objective(&MetaParams::from_flat(dims, t).expect("len")),
        &p.to_flat(),
        &g.to_flat(),
    ))
}

fn check_projection(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (rows, n) = (rng.gen_range(1..5), rng.gen_range(1..6));
    let p = vec(rng, rows * n, 1.0);
    let h = vec(rng, n, 1.0);
    let c = vec(rng, rows, 1.0);
    let f = |p: &[f64], h: &[f64]| project(p, h).iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let mut dp = vec![0.0; p.len()];
    let dh = backward_projection(&p, &h, &c, &mut dp);
    Ok(fd_check(|t| f(t, &h), &p, &dp).max(fd_check(|t| f(&p, t), &h, &dh)))
}

fn check_softmax_ce(rng: &mut ChaCha8Rng) -> Result<f64> {
    let k = rng.gen_range(2..11);
    let logits = vec(rng, k, 5.0);
    let label = rng.gen_range(0..k);
    let g = cross_entropy_grad(&softmax(&logits), label);
    Ok(fd_check(|l| cross_entropy(l, label), &logits, &g))
}

fn check_dense(rng: &mut ChaCha8Rng) -> Result<f64> {
    let widths: Vec<usize> = if rng.gen_bool(0.5) {
        vec![rng.gen_range(1..6), rng.gen_range(2..5)]
    } else {
        vec![rng.gen_range(1..6), rng.gen_range(1..7), rng.gen_range(2..5)]
    };
    let net = DenseNet::init(&widths, rng);
    let x = vec(rng, widths[0], 2.0);
    let label = rng.gen_range(0..*widths.last().unwrap());
    let tape = net.forward(&x)?;
    let e = cross_entropy_grad(&softmax(tape.logits()), label);
    let mut g = net.zeros_like();
    let dx = net.backward(&tape, &e, &mut g)?;
    let loss = |n: &DenseNet, x: &[f64]| cross_entropy(n.forward(x).expect("shape").logits(), label);
    let mut probe = net.clone();
    let w = fd_check(
        |t| {
            probe.assign_flat(t).expect("len");
            loss(&probe, &x)
        },
        &net.to_flat(),
        &g.to_flat(),
    );
    Ok(w.max(fd_check(|t| loss(&net, t), &x, &dx)))
}

/// Shadow layer: its error message is the exact input gradient scaled by
/// `A / B`, and its weight update direction the exact gradient scaled by `A`.
fn check_shadow(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (a, b) = (rng.gen_range(1..5), rng.gen_range(1..5));
    let layer = ShadowLayer::init(a, b, rng);
    let x = vec(rng, a, 2.0);
    let c = vec(rng, b, 1.0);
    let f = |l: &ShadowLayer, x: &[f64]| l.forward(x).iter().zip(&c).map(|(p, q)| p * q).sum::<f64>();
    let dx: Vec<f64> = layer.backward(&x, &c).iter().map(|v| v * b as f64 / a as f64).collect();
    let mut stepped = layer.clone();
    stepped.sgd(&x, &c, 1.0);
    let scale = 1.0 / a as f64;
    let dw: Vec<f64> = layer.w.iter().zip(&stepped.w).map(|(o, n)| (o - n) * scale).collect();
    let db: Vec<f64> = layer.bias.iter().zip(&stepped.bias).map(|(o, n)| (o - n) * scale).collect();
    let mut probe = layer.clone();
    let worst_w = fd_check(
        |t| {
            probe.w.copy_from_slice(t);
            f(&probe, &x)
        },
        &layer.w,
        &dw,
    );
    let mut probe = layer.clone();
    let worst_b = fd_check(
        |t| {
            probe.bias.copy_from_slice(t);
            f(&probe, &x)
        },
        &layer.bias,
        &db,
    );
    Ok(fd_check(|t| f(&layer, t), &x, &dx).max(worst_w).max(worst_b))
}

/// The cloning regression loss through both unrolled sweeps.
fn check_cloning_loss(rng: &mut ChaCha8Rng) -> Result<f64> {
    let dims = Dims::new(3, 2, 2);
    let p = random_params(rng, dims);
    let s = CloningSample::new(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.01..0.5),
    );
    let weights = LossWeights {
        y: rng.gen_range(0.5..2.0),
        dw: rng.gen_range(0.5..2.0),
        db: rng.gen_range(0.5..2.0),
        e_prev: rng.gen_range(0.5..2.0),
    };
    let mut g = zero_grads(dims);
    sample_loss_grad(&p, &s, &weights, &mut g)?;
    let f = |t: &[f64]| {
        let q = MetaParams::from_flat(dims, t).expect("len");
        let mut scratch = zero_grads(dims);
        sample_loss_grad(&q, &s, &weights, &mut scratch).expect("finite")
    };
    Ok(fd_check(f, &p.to_flat(), &g.to_flat()))
}

type Check = fn(&mut ChaCha8Rng) -> Result<f64>;

const CHECKS: [(&str, Check); 7] = [
    ("lstm_cell", check_lstm_cell),
    ("lstm_unroll_with_projections", check_lstm_unroll),
    ("message_projection", check_projection),
    ("softmax_cross_entropy", check_softmax_ce),
    ("dense_tanh_network", check_dense),
    ("shadow_layer", check_shadow),
    ("cloning_regression_loss", check_cloning_loss),
];

/// Run every check on `instances` random instances each.
pub fn run_suite(instances: usize, seed: u64) -> Result<Vec<GradCheck>> {
    let mut out = Vec::new();
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            worst = worst.max(check(&mut rng)?);
        }
        out.push(GradCheck {
            operation: name,
            instances,
            max_deviation: worst,
            passed: worst < GRAD_TOLERANCE,
        });
    }
    Ok(out)
}
