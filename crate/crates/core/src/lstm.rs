//! The shared LSTM cell (no peepholes; sigmoid gates, tanh candidate and
//! output squashing).

use crate::error::{check_len, Result};
use crate::params::{Dims, LstmCellParams};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[r] += sum_c m[r, c] * v[c]` for a row-major `rows x v.len()` matrix.
#[inline]
pub(crate) fn matvec_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    debug_assert_eq!(m.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out[r] += sum_c m[r, c] * v[c]` over a column window `col0..col0 + v.len()`
/// of a row-major matrix with `stride` columns.
#[inline]
pub(crate) fn matvec_cols_acc(m: &[f64], stride: usize, col0: usize, v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(stride)) {
        *o += row[col0..col0 + v.len()]
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
}

/// Gate pre-activations `W_in [fwd; bwd] + W_rec h + bias` (length `4N`).
pub fn gate_preactivations(
    cell: &LstmCellParams,
    dims: Dims,
    h: &[f64],
    fwd_in: &[f64],
    bwd_in: &[f64],
    pre: &mut [f64],
) {
    pre.copy_from_slice(&cell.biases);
    let stride = dims.msg_in();
    matvec_cols_acc(&cell.input_weights, stride, 0, fwd_in, pre);
    matvec_cols_acc(&cell.input_weights, stride, dims.nf, bwd_in, pre);
    matvec_acc(&cell.recurrent_weights, h, pre);
}

/// Turn pre-activations into the new `(z, h)` in place. `pre` is overwritten
/// with the gate activations `[i, f, g, o]`.
#[inline]
pub fn apply_gates(pre: &mut [f64], z: &[f64], z_out: &mut [f64], h_out: &mut [f64]) {
    let n = z.len();
    let (ifg, o) = pre.split_at_mut(3 * n);
    let (i, fg) = ifg.split_at_mut(n);
    let (f, g) = fg.split_at_mut(n);
    for j in 0..n {
        i[j] = sigmoid(i[j]);
        f[j] = sigmoid(f[j]);
        g[j] = g[j].tanh();
        o[j] = sigmoid(o[j]);
        let zn = f[j] * z[j] + i[j] * g[j];
        z_out[j] = zn;
        h_out[j] = o[j] * zn.tanh();
    }
}

/// One step of the shared cell: `(z, h) <- f_LSTM(z, h, fwd, bwd)`.
pub fn lstm_cell_step(
    cell: &LstmCellParams,
    dims: Dims,
    z: &[f64],
    h: &[f64],
    fwd_in: &[f64],
    bwd_in: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    cell.check(dims)?;
    check_len("cell state z", dims.n, z.len())?;
    check_len("cell state h", dims.n, h.len())?;
    check_len("forward message", dims.nf, fwd_in.len())?;
    check_len("backward message", dims.nb, bwd_in.len())?;
    let mut pre = vec![0.0; 4 * dims.n];
    gate_preactivations(cell, dims, h, fwd_in, bwd_in, &mut pre);
    let mut z_out = vec![0.0; dims.n];
    let mut h_out = vec![0.0; dims.n];
    apply_gates(&mut pre, z, &mut z_out, &mut h_out);
    Ok((z_out, h_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Gate, MetaParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight-line evaluation with explicit per-gate loops, written
    /// independently of `gate_preactivations`/`apply_gates`.
    fn reference_step(
        cell: &LstmCellParams,
        dims: Dims,
        z: &[f64],
        h: &[f64],
        fwd: &[f64],
        bwd: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let n = dims.n;
        let cols = dims.nf + dims.nb;
        let mut u = fwd.to_vec();
        u.extend_from_slice(bwd);
        let gate = |g: usize, j: usize| -> f64 {
            let r = g * n + j;
            let mut s = cell.biases[r];
            for c in 0..cols {
                s += cell.input_weights[r * cols + c] * u[c];
            }
            for k in 0..n {
                s += cell.recurrent_weights[r * n + k] * h[k];
            }
            s
        };
        let mut z2 = vec![0.0; n];
        let mut h2 = vec![0.0; n];
        for j in 0..n {
            let i = 1.0 / (1.0 + (-gate(0, j)).exp());
            let f = 1.0 / (1.0 + (-gate(1, j)).exp());
            let g = gate(2, j).tanh();
            let o = 1.0 / (1.0 + (-gate(3, j)).exp());
            z2[j] = f * z[j] + i * g;
            h2[j] = o * z2[j].tanh();
        }
        (z2, h2)
    }

    #[test]
    fn zero_everything_gives_zero() {
        let dims = Dims::new(4, 2, 2);
        let cell = LstmCellParams::zeros(dims);
        let (z, h) = lstm_cell_step(&cell, dims, &[0.0; 4], &[0.0; 4], &[0.0; 2], &[0.0; 2]).unwrap();
        assert!(z.iter().chain(&h).all(|&v| v == 0.0));
    }

    #[test]
    fn forget_bias_one_scales_cell_state() {
        let dims = Dims::new(3, 2, 2);
        let mut cell = LstmCellParams::zeros(dims);
        cell.bias_block_mut(Gate::Forget, 3).fill(1.0);
        let z = [1.0, -2.0, 0.5];
        let (z2, h2) = lstm_cell_step(&cell, dims, &z, &[0.0; 3], &[0.0; 2], &[0.0; 2]).unwrap();
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((s1 - 0.731_058_578_630_004_9).abs() < 1e-15);
        for j in 0..3 {
            assert!((z2[j] - s1 * z[j]).abs() < 1e-15);
            // output gate sigma(0) = 0.5
            assert!((h2[j] - 0.5 * (s1 * z[j]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_straight_line_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, nf, nb) in &[(1, 1, 1), (3, 2, 4), (16, 8, 8)] {
            let dims = Dims::new(n, nf, nb);
            for _ in 0..10 {
                let p = MetaParams::init(dims, &mut rng);
                let mut v = |k: usize| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
                let (z, h, fwd, bwd) = (v(n), v(n), v(nf), v(nb));
                let (z1, h1) = lstm_cell_step(&p.cell, dims, &z, &h, &fwd, &bwd).unwrap();
                let (z2, h2) = reference_step(&p.cell, dims, &z, &h, &fwd, &bwd);
                for j in 0..n {
                    assert!((z1[j] - z2[j]).abs() < 1e-12);
                    assert!((h1[j] - h2[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let dims = Dims::new(3, 2, 2);
        let cell = LstmCellParams::zeros(dims);
        let err = lstm_cell_step(&cell, dims, &[0.0; 3], &[0.0; 3], &[0.0; 1], &[0.0; 2]).unwrap_err();
        assert!(matches!(err, crate::VsmlError::Dimension { .. }));
    }
}
