//! Grids of parameter-shared sub-RNNs, message passing between stacked
//! layers, and the per-example inner step.
//!
//! Layer `l` (0-based) is an `A_l x B_l` grid. Messages live on the `K + 1`
//! layer boundaries: boundary `l` has width `A_l` (boundary `K` has width
//! `B_{K-1}`). Layer `l` reads `fwd[l]` and `bwd[l + 1]` and writes
//! `fwd[l + 1]` and `bwd[l]`. Inputs enter at `fwd[0]`, logits are read from
//! `fwd[K]` and errors are fed into `bwd[K]`. Every designated scalar (datum,
//! error, output) occupies slot 0 of its message vector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, FaultSite, Result, VsmlError};
use crate::loss::{argmax, cross_entropy, cross_entropy_grad, softmax};
use crate::lstm::{apply_gates, matvec_acc, matvec_cols_acc};
use crate::params::{Dims, MetaParams, GATES};

/// Logits are squashed as `OUTPUT_BOUND * tanh(v / OUTPUT_BOUND)`.
pub const OUTPUT_BOUND: f64 = 100.0;

/// Layer sizes `(A_l, B_l)` and ticks per example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub sizes: Vec<(usize, usize)>,
    pub ticks_per_example: usize,
}

impl LayerSpec {
    pub fn new(sizes: Vec<(usize, usize)>, ticks_per_example: usize) -> Result<Self> {
        let spec = LayerSpec {
            sizes,
            ticks_per_example,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A chain `input -> hidden... -> output`.
    pub fn chain(input: usize, hidden: &[usize], output: usize, ticks: usize) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        LayerSpec::new(widths.windows(2).map(|w| (w[0], w[1])).collect(), ticks)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(VsmlError::config("layer spec needs at least one layer"));
        }
        if self.ticks_per_example == 0 {
            return Err(VsmlError::config("ticks_per_example must be positive"));
        }
        for (k, &(a, b)) in self.sizes.iter().enumerate() {
            if a == 0 || b == 0 {
                return Err(VsmlError::config(format!("layer {k} has an empty axis")));
            }
            if k > 0 && self.sizes[k - 1].1 != a {
                return Err(VsmlError::config(format!(
                    "layer {k}: A = {a} must equal B of layer {} = {}",
                    k - 1,
                    self.sizes[k - 1].1
                )));
            }
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0].0
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1].1
    }

    /// Width of message boundary `l` in `0..=K`.
    pub fn boundary_width(&self, l: usize) -> usize {
        if l < self.sizes.len() {
            self.sizes[l].0
        } else {
            self.output_dim()
        }
    }

    /// Number of learned state scalars `|V_L|` (both `z` and `h`).
    pub fn state_count(&self, n: usize) -> usize {
        self.sizes.iter().map(|&(a, b)| 2 * a * b * n).sum()
    }
}

/// States `z` (cell) and `h` (hidden) of one `A x B` layer, laid out
/// `[(a * B + b) * N + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub a: usize,
    pub b: usize,
    pub n: usize,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
}

impl LayerState {
    pub fn zeros(a: usize, b: usize, n: usize) -> Self {
        LayerState {
            a,
            b,
            n,
            z: vec![0.0; a * b * n],
            h: vec![0.0; a * b * n],
        }
    }

    #[inline]
    pub fn cell_range(&self, a: usize, b: usize) -> std::ops::Range<usize> {
        let start = (a * self.b + b) * self.n;
        start..start + self.n
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().chain(&self.h).all(|v| v.is_finite())
    }
}

/// The learned variables: one [`LayerState`] per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SubRnnGrid {
    pub layers: Vec<LayerState>,
}

impl SubRnnGrid {
    pub fn zeros(spec: &LayerSpec, n: usize) -> Self {
        SubRnnGrid {
            layers: spec
                .sizes
                .iter()
                .map(|&(a, b)| LayerState::zeros(a, b, n))
                .collect(),
        }
    }

    pub fn matches(&self, spec: &LayerSpec, n: usize) -> bool {
        self.layers.len() == spec.num_layers()
            && self
                .layers
                .iter()
                .zip(&spec.sizes)
                .all(|(l, &(a, b))| l.a == a && l.b == b && l.n == n)
    }

    pub fn clip(&mut self, bound: f64) {
        for layer in &mut self.layers {
            for v in layer.z.iter_mut().chain(layer.h.iter_mut()) {
                *v = v.clamp(-bound, bound);
            }
        }
    }
}

/// Draw every `z` and `h` entry i.i.d. from a standard normal.
pub fn init_states(spec: &LayerSpec, n: usize, seed: u64) -> SubRnnGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = SubRnnGrid::zeros(spec, n);
    for layer in &mut grid.layers {
        for v in layer.z.iter_mut().chain(layer.h.iter_mut()) {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    grid
}

/// Forward and backward messages on every layer boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    /// `fwd[l]`: `width(l) x Nf`.
    pub fwd: Vec<Vec<f64>>,
    /// `bwd[l]`: `width(l) x Nb`.
    pub bwd: Vec<Vec<f64>>,
}

impl Messages {
    pub fn zeros(spec: &LayerSpec, dims: Dims) -> Self {
        let k = spec.num_layers();
        Messages {
            fwd: (0..=k)
                .map(|l| vec![0.0; spec.boundary_width(l) * dims.nf])
                .collect(),
            bwd: (0..=k)
                .map(|l| vec![0.0; spec.boundary_width(l) * dims.nb])
                .collect(),
        }
    }
}

/// Write a datum into slot 0 of each forward message row; other slots zero.
pub fn feed_input(x: &[f64], nf: usize, msg: &mut [f64]) -> Result<()> {
    check_len("input datum", msg.len() / nf, x.len())?;
    msg.fill(0.0);
    for (row, &v) in msg.chunks_exact_mut(nf).zip(x) {
        row[0] = v;
    }
    Ok(())
}

/// Write an error vector into slot 0 of each backward message row.
pub fn feed_error(e: &[f64], nb: usize, msg: &mut [f64]) -> Result<()> {
    check_len("output error", msg.len() / nb, e.len())?;
    msg.fill(0.0);
    for (row, &v) in msg.chunks_exact_mut(nb).zip(e) {
        row[0] = v;
    }
    Ok(())
}

#[inline]
pub fn squash_output(v: f64) -> f64 {
    OUTPUT_BOUND * (v / OUTPUT_BOUND).tanh()
}

/// Logits from slot 0 of the final forward message.
pub fn read_output(msg: &[f64], nf: usize) -> Vec<f64> {
    msg.chunks_exact(nf).map(|row| squash_output(row[0])).collect()
}

/// Reusable buffers for [`layer_step`].
#[derive(Debug, Default, Clone)]
pub struct StepScratch {
    pre_a: Vec<f64>,
    pre_b: Vec<f64>,
    pre: Vec<f64>,
    mean_over_a: Vec<f64>,
    mean_over_b: Vec<f64>,
    z_new: Vec<f64>,
    h_new: Vec<f64>,
}

/// Update every cell of one layer and emit averaged outgoing messages.
///
/// Cell `(a, b)` receives forward row `a` and backward row `b`. The outgoing
/// forward row `b` is `P_f * mean_a h_ab` and the backward row `a` is
/// `P_b * mean_b h_ab`.
#[allow(clippy::too_many_arguments)]
pub fn layer_step(
    layer: &mut LayerState,
    layer_index: usize,
    params: &MetaParams,
    fwd_in: &[f64],
    bwd_in: &[f64],
    fwd_out: &mut [f64],
    bwd_out: &mut [f64],
    clip: Option<f64>,
    scratch: &mut StepScratch,
) -> Result<()> {
    let dims = params.dims;
    let (na, nb_cells, n) = (layer.a, layer.b, layer.n);
    check_len("layer state size", dims.n, n)?;
    check_len("incoming forward message", na * dims.nf, fwd_in.len())?;
    check_len("incoming backward message", nb_cells * dims.nb, bwd_in.len())?;
    check_len("outgoing forward message", nb_cells * dims.nf, fwd_out.len())?;
    check_len("outgoing backward message", na * dims.nb, bwd_out.len())?;

    let g = GATES * n;
    let stride = dims.msg_in();
    let cell = &params.cell;

    // Message contributions are shared along rows/columns of the grid.
    scratch.pre_a.clear();
    scratch.pre_a.resize(na * g, 0.0);
    for (a, out) in scratch.pre_a.chunks_exact_mut(g).enumerate() {
        let m = &fwd_in[a * dims.nf..(a + 1) * dims.nf];
        matvec_cols_acc(&cell.input_weights, stride, 0, m, out);
    }
    scratch.pre_b.clear();
    scratch.pre_b.resize(nb_cells * g, 0.0);
    for (b, out) in scratch.pre_b.chunks_exact_mut(g).enumerate() {
        out.copy_from_slice(&cell.biases);
        let m = &bwd_in[b * dims.nb..(b + 1) * dims.nb];
        matvec_cols_acc(&cell.input_weights, stride, dims.nf, m, out);
    }

    scratch.pre.resize(g, 0.0);
    scratch.mean_over_a.clear();
    scratch.mean_over_a.resize(nb_cells * n, 0.0);
    scratch.mean_over_b.clear();
    scratch.mean_over_b.resize(na * n, 0.0);
    scratch.z_new.resize(n, 0.0);
    scratch.h_new.resize(n, 0.0);
    let z_buf = &mut scratch.z_new;
    let h_buf = &mut scratch.h_new;

    for a in 0..na {
        let pa = &scratch.pre_a[a * g..(a + 1) * g];
        for b in 0..nb_cells {
            let pb = &scratch.pre_b[b * g..(b + 1) * g];
            let range = layer.cell_range(a, b);
            let pre = &mut scratch.pre;
            for ((p, x), y) in pre.iter_mut().zip(pa).zip(pb) {
                *p = x + y;
            }
            matvec_acc(&cell.recurrent_weights, &layer.h[range.clone()], pre);
            apply_gates(pre, &layer.z[range.clone()], z_buf, h_buf);
            if let Some(c) = clip {
                for v in z_buf.iter_mut().chain(h_buf.iter_mut()) {
                    *v = v.clamp(-c, c);
                }
            }
            if !z_buf.iter().chain(h_buf.iter()).all(|v| v.is_finite()) {
                return Err(VsmlError::NumericFault(FaultSite {
                    step: None,
                    layer: layer_index,
                    a,
                    b,
                }));
            }
            layer.z[range.clone()].copy_from_slice(z_buf);
            layer.h[range].copy_from_slice(h_buf);
            let ma = &mut scratch.mean_over_a[b * n..(b + 1) * n];
            for (m, v) in ma.iter_mut().zip(h_buf.iter()) {
                *m += v;
            }
            let mb = &mut scratch.mean_over_b[a * n..(a + 1) * n];
            for (m, v) in mb.iter_mut().zip(h_buf.iter()) {
                *m += v;
            }
        }
    }

    let inv_a = 1.0 / na as f64;
    fwd_out.fill(0.0);
    for (b, out) in fwd_out.chunks_exact_mut(dims.nf).enumerate() {
        let mean = &mut scratch.mean_over_a[b * n..(b + 1) * n];
        mean.iter_mut().for_each(|v| *v *= inv_a);
        matvec_acc(&params.proj.forward, mean, out);
    }
    let inv_b = 1.0 / nb_cells as f64;
    bwd_out.fill(0.0);
    for (a, out) in bwd_out.chunks_exact_mut(dims.nb).enumerate() {
        let mean = &mut scratch.mean_over_b[a * n..(a + 1) * n];
        mean.iter_mut().for_each(|v| *v *= inv_b);
        matvec_acc(&params.proj.backward, mean, out);
    }
    Ok(())
}

/// Everything recorded about one inner-loop example.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub predicted: usize,
    /// Present when a label was supplied.
    pub loss: Option<f64>,
    pub error: Option<Vec<f64>>,
}

impl StepOutput {
    pub fn from_logits(logits: Vec<f64>, label: Option<usize>) -> Self {
        let probs = softmax(&logits);
        let predicted = argmax(&logits);
        let (loss, error) = match label {
            Some(y) => (
                Some(cross_entropy(&logits, y)),
                Some(cross_entropy_grad(&probs, y)),
            ),
            None => (None, None),
        };
        StepOutput {
            logits,
            probs,
            predicted,
            loss,
            error,
        }
    }
}

/// A VSML RNN bound to shared parameters: grid states, boundary messages and
/// scratch space.
#[derive(Debug, Clone)]
pub struct VsmlRnn<'p> {
    params: &'p MetaParams,
    spec: LayerSpec,
    pub grid: SubRnnGrid,
    pub msgs: Messages,
    clip: Option<f64>,
    scratch: StepScratch,
}

impl<'p> VsmlRnn<'p> {
    /// Fresh episode with standard-normal states drawn from `state_seed`.
    pub fn new(params: &'p MetaParams, spec: LayerSpec, state_seed: u64) -> Result<Self> {
        spec.validate()?;
        let grid = init_states(&spec, params.dims.n, state_seed);
        VsmlRnn::with_grid(params, spec, grid)
    }

    pub fn with_grid(params: &'p MetaParams, spec: LayerSpec, grid: SubRnnGrid) -> Result<Self> {
        params.check()?;
        spec.validate()?;
        if !grid.matches(&spec, params.dims.n) {
            return Err(VsmlError::config("grid shape does not match layer spec"));
        }
        let msgs = Messages::zeros(&spec, params.dims);
        Ok(VsmlRnn {
            params,
            spec,
            grid,
            msgs,
            clip: None,
            scratch: StepScratch::default(),
        })
    }

    /// Clip every state entry to `[-bound, bound]` after each update.
    pub fn with_clip(mut self, bound: Option<f64>) -> Self {
        self.clip = bound;
        self
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &MetaParams {
        self.params
    }

    /// Run layers `0..K` once.
    pub fn tick(&mut self) -> Result<()> {
        for l in 0..self.spec.num_layers() {
            let (fwd_lo, fwd_hi) = self.msgs.fwd.split_at_mut(l + 1);
            let (bwd_lo, bwd_hi) = self.msgs.bwd.split_at_mut(l + 1);
            layer_step(
                &mut self.grid.layers[l],
                l,
                self.params,
                &fwd_lo[l],
                &bwd_hi[0],
                &mut fwd_hi[0],
                &mut bwd_lo[l],
                self.clip,
                &mut self.scratch,
            )?;
        }
        Ok(())
    }

    /// Current logits read from the output boundary.
    pub fn output(&self) -> Vec<f64> {
        read_output(&self.msgs.fwd[self.spec.num_layers()], self.params.dims.nf)
    }

    pub fn feed_input(&mut self, x: &[f64]) -> Result<()> {
        feed_input(x, self.params.dims.nf, &mut self.msgs.fwd[0])
    }

    pub fn feed_error(&mut self, e: &[f64]) -> Result<()> {
        let k = self.spec.num_layers();
        feed_error(e, self.params.dims.nb, &mut self.msgs.bwd[k])
    }

    /// One online example: feed `x`, run `ticks_per_example` ticks, read
    /// logits, and (given a label) feed the loss gradient back as the error
    /// for the following ticks.
    pub fn inner_step(&mut self, x: &[f64], label: Option<usize>) -> Result<StepOutput> {
        if let Some(y) = label {
            if y >= self.spec.output_dim() {
                return Err(VsmlError::Dimension {
                    what: "label (class count)",
                    expected: self.spec.output_dim(),
                    actual: y + 1,
                });
            }
        }
        self.feed_input(x)?;
        for _ in 0..self.spec.ticks_per_example {
            self.tick()?;
        }
        let out = StepOutput::from_logits(self.output(), label);
        if let Some(e) = &out.error {
            self.feed_error(e)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::lstm_cell_step;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn layer_spec_constraint() {
        assert!(LayerSpec::new(vec![(4, 3), (3, 2)], 1).is_ok());
        assert!(LayerSpec::new(vec![(4, 3), (2, 2)], 1).is_err());
        assert!(LayerSpec::new(vec![(4, 3)], 0).is_err());
        let s = LayerSpec::chain(784, &[32], 10, 1).unwrap();
        assert_eq!(s.sizes, vec![(784, 32), (32, 10)]);
        assert_eq!(s.boundary_width(0), 784);
        assert_eq!(s.boundary_width(2), 10);
    }

    #[test]
    fn zero_params_zero_state_gives_zero_messages() {
        let dims = Dims::new(4, 3, 3);
        let params = MetaParams::zeros(dims);
        let mut layer = LayerState::zeros(3, 2, 4);
        let mut fo = vec![1.0; 2 * 3];
        let mut bo = vec![1.0; 3 * 3];
        layer_step(&mut layer, 0, &params, &[0.0; 9], &[0.0; 6], &mut fo, &mut bo, None, &mut StepScratch::default()).unwrap();
        assert!(fo.iter().chain(&bo).all(|&v| v == 0.0));
    }

    #[test]
    fn outgoing_messages_match_brute_force() {
        let dims = Dims::new(5, 3, 2);
        let mut r = rng(4);
        let params = MetaParams::init(dims, &mut r);
        let (na, nb) = (3, 2);
        let mut layer = LayerState::zeros(na, nb, 5);
        layer.z = random_vec(&mut r, na * nb * 5);
        layer.h = random_vec(&mut r, na * nb * 5);
        let before = layer.clone();
        let fwd_in = random_vec(&mut r, na * dims.nf);
        let bwd_in = random_vec(&mut r, nb * dims.nb);
        let mut fo = vec![0.0; nb * dims.nf];
        let mut bo = vec![0.0; na * dims.nb];
        layer_step(&mut layer, 0, &params, &fwd_in, &bwd_in, &mut fo, &mut bo, None, &mut StepScratch::default()).unwrap();

        // Per-cell reference update, then explicit sums of projections.
        let mut hs = vec![vec![vec![0.0; 5]; nb]; na];
        for a in 0..na {
            for b in 0..nb {
                let rg = before.cell_range(a, b);
                let (z2, h2) = lstm_cell_step(
                    &params.cell,
                    dims,
                    &before.z[rg.clone()],
                    &before.h[rg.clone()],
                    &fwd_in[a * 3..a * 3 + 3],
                    &bwd_in[b * 2..b * 2 + 2],
                )
                .unwrap();
                for j in 0..5 {
                    assert!((layer.z[rg.start + j] - z2[j]).abs() < 1e-12);
                    assert!((layer.h[rg.start + j] - h2[j]).abs() < 1e-12);
                }
                hs[a][b] = h2;
            }
        }
        for b in 0..nb {
            for r_ in 0..dims.nf {
                let mut s = 0.0;
                for a in 0..na {
                    for j in 0..5 {
                        s += params.proj.forward[r_ * 5 + j] * hs[a][b][j];
                    }
                }
                assert!((fo[b * dims.nf + r_] - s / na as f64).abs() < 1e-12);
            }
        }
        for a in 0..na {
            for r_ in 0..dims.nb {
                let mut s = 0.0;
                for b in 0..nb {
                    for j in 0..5 {
                        s += params.proj.backward[r_ * 5 + j] * hs[a][b][j];
                    }
                }
                assert!((bo[a * dims.nb + r_] - s / nb as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_cell_grid_is_a_plain_lstm_step() {
        let dims = Dims::new(6, 4, 4);
        let mut r = rng(8);
        let mut params = MetaParams::init(dims, &mut r);
        params.proj = crate::params::MessageProjections::zeros(dims);
        let mut layer = LayerState::zeros(1, 1, 6);
        layer.z = random_vec(&mut r, 6);
        layer.h = random_vec(&mut r, 6);
        let fwd = random_vec(&mut r, 4);
        let bwd = random_vec(&mut r, 4);
        let (z2, h2) = lstm_cell_step(&params.cell, dims, &layer.z, &layer.h, &fwd, &bwd).unwrap();
        let mut fo = vec![0.0; 4];
        let mut bo = vec![0.0; 4];
        layer_step(&mut layer, 0, &params, &fwd, &bwd, &mut fo, &mut bo, None, &mut StepScratch::default()).unwrap();
        for j in 0..6 {
            assert!((layer.z[j] - z2[j]).abs() < 1e-12);
            assert!((layer.h[j] - h2[j]).abs() < 1e-12);
        }
        assert!(fo.iter().chain(&bo).all(|&v| v == 0.0));
    }

    #[test]
    fn feed_input_places_datum_in_slot_zero() {
        let mut msg = vec![9.0; 4 * 3];
        feed_input(&[0.0, 0.0, 1.0, 0.0], 3, &mut msg).unwrap();
        for (a, row) in msg.chunks(3).enumerate() {
            assert_eq!(row[0], if a == 2 { 1.0 } else { 0.0 });
            assert_eq!(&row[1..], &[0.0, 0.0]);
        }
        let pixels: Vec<f64> = (0..784).map(|i| (i % 256) as f64 / 255.0).collect();
        let mut big = vec![0.0; 784 * 8];
        feed_input(&pixels, 8, &mut big).unwrap();
        for a in 0..784 {
            assert_eq!(big[a * 8], pixels[a]);
        }
        assert!(feed_input(&[1.0; 3], 3, &mut msg).is_err());
        assert!(feed_error(&[1.0; 5], 3, &mut msg).is_err());
    }

    #[test]
    fn output_squash() {
        assert_eq!(squash_output(0.0), 0.0);
        assert_eq!(squash_output(1e6), 100.0 * (1e4f64).tanh());
        assert!((squash_output(1e6) - 100.0).abs() < 1e-12);
        let v = squash_output(0.5);
        assert!((v - 100.0 * 0.005f64.tanh()).abs() < 1e-15);
        assert!((v - 0.499_995_833).abs() < 1e-9);
    }

    #[test]
    fn zero_params_predict_uniformly() {
        let params = MetaParams::zeros(Dims::scratch());
        let spec = LayerSpec::new(vec![(6, 10)], 2).unwrap();
        let mut net = VsmlRnn::new(&params, spec, 1).unwrap();
        for t in 0..5 {
            let out = net.inner_step(&[0.3; 6], Some(t % 10)).unwrap();
            assert!(out.logits.iter().all(|&l| l == 0.0));
            assert!((out.loss.unwrap() - 10f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn init_states_statistics_and_determinism() {
        let spec = LayerSpec::new(vec![(50, 25)], 1).unwrap();
        let g1 = init_states(&spec, 40, 7);
        let g2 = init_states(&spec, 40, 7);
        let g3 = init_states(&spec, 40, 8);
        assert_eq!(g1, g2);
        assert_ne!(g1, g3);
        let vals: Vec<f64> = g1.layers[0].z.iter().chain(&g1.layers[0].h).copied().collect();
        let n = vals.len() as f64;
        assert_eq!(vals.len(), 100_000);
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn clipping_bounds_states() {
        let dims = Dims::new(4, 2, 2);
        let mut r = rng(2);
        let mut params = MetaParams::init(dims, &mut r);
        params.cell.biases.iter_mut().for_each(|b| *b += 5.0);
        let spec = LayerSpec::new(vec![(3, 2)], 1).unwrap();
        let mut net = VsmlRnn::new(&params, spec, 3).unwrap().with_clip(Some(4.0));
        for _ in 0..20 {
            net.inner_step(&[1.0, -1.0, 0.5], Some(0)).unwrap();
            for l in &net.grid.layers {
                assert!(l.z.iter().chain(&l.h).all(|v| v.abs() <= 4.0));
            }
        }
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let params = MetaParams::zeros(Dims::new(2, 1, 1));
        let spec = LayerSpec::new(vec![(2, 2)], 1).unwrap();
        let mut net = VsmlRnn::new(&params, spec, 0).unwrap();
        assert!(net.inner_step(&[0.0, 0.0], Some(2)).is_err());
    }

    #[test]
    fn numeric_fault_names_cell() {
        let dims = Dims::new(2, 1, 1);
        let mut params = MetaParams::zeros(dims);
        params.cell.input_weights[0] = 1.0; // input gate reads fwd slot 0
        params.cell.input_weights[2 * 2 * 2] = 1.0; // candidate reads fwd slot 0
        let spec = LayerSpec::new(vec![(2, 1)], 1).unwrap();
        let mut net = VsmlRnn::new(&params, spec, 0).unwrap();
        let err = net.inner_step(&[0.0, f64::NAN], Some(0)).unwrap_err();
        match err {
            VsmlError::NumericFault(site) => assert_eq!((site.layer, site.a, site.b), (0, 1, 0)),
            e => panic!("unexpected {e}"),
        }
    }
}
