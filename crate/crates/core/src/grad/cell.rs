//! Reverse mode through the shared LSTM cell and the message projections.

use crate::error::{check_len, Result};
use crate::lstm::{apply_gates, gate_preactivations};
use crate::params::{Dims, LstmCellParams, MessageProjections, MetaParams};

/// Forward intermediates of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTape {
    pub dims: Dims,
    pub z_prev: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub fwd_in: Vec<f64>,
    pub bwd_in: Vec<f64>,
    /// Gate activations `[i, f, g, o]`.
    pub gates: Vec<f64>,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
}

/// Gradients w.r.t. the inputs of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInputGrads {
    pub z_prev: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub fwd_in: Vec<f64>,
    pub bwd_in: Vec<f64>,
}

pub fn forward_cell(
    cell: &LstmCellParams,
    dims: Dims,
    z: &[f64],
    h: &[f64],
    fwd_in: &[f64],
    bwd_in: &[f64],
) -> Result<CellTape> {
    cell.check(dims)?;
    check_len("cell state z", dims.n, z.len())?;
    check_len("cell state h", dims.n, h.len())?;
    check_len("forward message", dims.nf, fwd_in.len())?;
    check_len("backward message", dims.nb, bwd_in.len())?;
    let mut gates = vec![0.0; 4 * dims.n];
    gate_preactivations(cell, dims, h, fwd_in, bwd_in, &mut gates);
    let mut z_out = vec![0.0; dims.n];
    let mut h_out = vec![0.0; dims.n];
    apply_gates(&mut gates, z, &mut z_out, &mut h_out);
    Ok(CellTape {
        dims,
        z_prev: z.to_vec(),
        h_prev: h.to_vec(),
        fwd_in: fwd_in.to_vec(),
        bwd_in: bwd_in.to_vec(),
        gates,
        z: z_out,
        h: h_out,
    })
}

/// Back-propagate `(dz, dh)` (gradients w.r.t. the step's outputs) through
/// one cell step. Parameter gradients are accumulated into `grads`.
pub fn backward_lstm_cell(
    cell: &LstmCellParams,
    tape: &CellTape,
    dz: &[f64],
    dh: &[f64],
    grads: &mut LstmCellParams,
) -> Result<CellInputGrads> {
    let dims = tape.dims;
    let n = dims.n;
    cell.check(dims)?;
    grads.check(dims)?;
    check_len("upstream dz", n, dz.len())?;
    check_len("upstream dh", n, dh.len())?;
    check_len("tape gates", 4 * n, tape.gates.len())?;

    // d pre-activation, stacked like the gates
    let mut dpre = vec![0.0; 4 * n];
    for j in 0..n {
        let (i, f, g, o) = (tape.gates[j], tape.gates[n + j], tape.gates[2 * n + j], tape.gates[3 * n + j]);
        let tz = tape.z[j].tanh();
        let dzt = dz[j] + dh[j] * o * (1.0 - tz * tz);
        dpre[j] = dzt * g * i * (1.0 - i);
        dpre[n + j] = dzt * tape.z_prev[j] * f * (1.0 - f);
        dpre[2 * n + j] = dzt * i * (1.0 - g * g);
        dpre[3 * n + j] = dh[j] * tz * o * (1.0 - o);
    }
    let mut out = CellInputGrads {
        z_prev: vec![0.0; n],
        h_prev: vec![0.0; n],
        fwd_in: vec![0.0; dims.nf],
        bwd_in: vec![0.0; dims.nb],
    };
    for j in 0..n {
        let o = tape.gates[3 * n + j];
        let tz = tape.z[j].tanh();
        out.z_prev[j] = (dz[j] + dh[j] * o * (1.0 - tz * tz)) * tape.gates[n + j];
    }
    let cols = dims.msg_in();
    for (r, &dp) in dpre.iter().enumerate() {
        if dp == 0.0 {
            continue;
        }
        grads.biases[r] += dp;
        let wrow = &cell.input_weights[r * cols..(r + 1) * cols];
        let grow = &mut grads.input_weights[r * cols..(r + 1) * cols];
        for c in 0..dims.nf {
            grow[c] += dp * tape.fwd_in[c];
            out.fwd_in[c] += dp * wrow[c];
        }
        for c in 0..dims.nb {
            grow[dims.nf + c] += dp * tape.bwd_in[c];
            out.bwd_in[c] += dp * wrow[dims.nf + c];
        }
        let rrow = &cell.recurrent_weights[r * n..(r + 1) * n];
        let grow = &mut grads.recurrent_weights[r * n..(r + 1) * n];
        for k in 0..n {
            grow[k] += dp * tape.h_prev[k];
            out.h_prev[k] += dp * rrow[k];
        }
    }
    Ok(out)
}

/// `m = P h` for a row-major `rows x h.len()` projection.
pub fn project(p: &[f64], h: &[f64]) -> Vec<f64> {
    let n = h.len();
    p.chunks_exact(n)
        .map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum())
        .collect()
}

/// Backward of [`project`]: accumulates `dP += dm h^T` and returns `P^T dm`.
pub fn backward_projection(p: &[f64], h: &[f64], dm: &[f64], dp: &mut [f64]) -> Vec<f64> {
    let n = h.len();
    let mut dh = vec![0.0; n];
    for (r, &g) in dm.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for k in 0..n {
            dp[r * n + k] += g * h[k];
            dh[k] += g * p[r * n + k];
        }
    }
    dh
}

/// Zero-valued gradient accumulator shaped like `MetaParams`.
pub fn zero_grads(dims: Dims) -> MetaParams {
    MetaParams {
        dims,
        cell: LstmCellParams::zeros(dims),
        proj: MessageProjections::zeros(dims),
    }
}
