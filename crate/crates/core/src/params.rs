//! Shared meta variables: one LSTM cell plus the two message projections.
//!
//! Every sub-RNN of every layer reads the same [`MetaParams`]. Weight
//! matrices are stored row-major as flat `Vec<f64>`; the four LSTM gate
//! blocks are stacked in the order input, forget, candidate, output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, VsmlError};

/// Number of LSTM gates; blocks are stacked in [`Gate`] order.
pub const GATES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Candidate = 2,
    Output = 3,
}

/// State size `n`, forward message size `nf` and backward message size `nb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Nf")]
    pub nf: usize,
    #[serde(rename = "Nb")]
    pub nb: usize,
}

impl Dims {
    pub const fn new(n: usize, nf: usize, nb: usize) -> Self {
        Dims { n, nf, nb }
    }

    /// Configuration used for meta learning from scratch.
    pub const fn scratch() -> Self {
        Dims::new(16, 8, 8)
    }

    /// Configuration used for learning algorithm cloning.
    pub const fn cloning() -> Self {
        Dims::new(64, 8, 8)
    }

    /// Width of the concatenated message input `[fwd, bwd]`.
    pub fn msg_in(&self) -> usize {
        self.nf + self.nb
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.nf == 0 || self.nb == 0 {
            return Err(VsmlError::config(format!(
                "dims must be positive, got N={} Nf={} Nb={}",
                self.n, self.nf, self.nb
            )));
        }
        Ok(())
    }

    /// Exact number of scalars in a [`MetaParams`] with these dims.
    pub fn param_count(&self) -> usize {
        let g = GATES * self.n;
        g * self.msg_in() + g * self.n + g + self.nf * self.n + self.nb * self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    /// `4N x (Nf + Nb)`, columns `0..Nf` read the forward message.
    pub input_weights: Vec<f64>,
    /// `4N x N`.
    pub recurrent_weights: Vec<f64>,
    /// `4N`.
    pub biases: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(dims: Dims) -> Self {
        let g = GATES * dims.n;
        LstmCellParams {
            input_weights: vec![0.0; g * dims.msg_in()],
            recurrent_weights: vec![0.0; g * dims.n],
            biases: vec![0.0; g],
        }
    }

    pub fn check(&self, dims: Dims) -> Result<()> {
        let g = GATES * dims.n;
        check_len("lstm input weights", g * dims.msg_in(), self.input_weights.len())?;
        check_len("lstm recurrent weights", g * dims.n, self.recurrent_weights.len())?;
        check_len("lstm biases", g, self.biases.len())
    }

    pub fn bias_block_mut(&mut self, gate: Gate, n: usize) -> &mut [f64] {
        let start = gate as usize * n;
        &mut self.biases[start..start + n]
    }
}

/// Linear, bias-free maps from a sub-RNN hidden state to its outgoing messages.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageProjections {
    /// `Nf x N`.
    pub forward: Vec<f64>,
    /// `Nb x N`.
    pub backward: Vec<f64>,
}

impl MessageProjections {
    pub fn zeros(dims: Dims) -> Self {
        MessageProjections {
            forward: vec![0.0; dims.nf * dims.n],
            backward: vec![0.0; dims.nb * dims.n],
        }
    }

    pub fn check(&self, dims: Dims) -> Result<()> {
        check_len("forward projection", dims.nf * dims.n, self.forward.len())?;
        check_len("backward projection", dims.nb * dims.n, self.backward.len())
    }
}

/// The complete set of meta variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaParams {
    pub dims: Dims,
    pub cell: LstmCellParams,
    pub proj: MessageProjections,
}

/// Names of the parameter blocks, in flattening order.
pub const BLOCK_NAMES: [&str; 5] = [
    "lstm_input_weights",
    "lstm_recurrent_weights",
    "lstm_biases",
    "forward_projection",
    "backward_projection",
];

impl MetaParams {
    pub fn zeros(dims: Dims) -> Self {
        MetaParams {
            dims,
            cell: LstmCellParams::zeros(dims),
            proj: MessageProjections::zeros(dims),
        }
    }

    /// Uniform `[-a, a]` with `a = 1/sqrt(fan_in)` per block, forget-gate
    /// biases set to `+1`.
    pub fn init<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Self {
        let mut p = MetaParams::zeros(dims);
        let gate_bound = 1.0 / ((dims.msg_in() + dims.n) as f64).sqrt();
        let proj_bound = 1.0 / (dims.n as f64).sqrt();
        for v in p
            .cell
            .input_weights
            .iter_mut()
            .chain(p.cell.recurrent_weights.iter_mut())
            .chain(p.cell.biases.iter_mut())
        {
            *v = rng.gen_range(-gate_bound..=gate_bound);
        }
        for v in p.proj.forward.iter_mut().chain(p.proj.backward.iter_mut()) {
            *v = rng.gen_range(-proj_bound..=proj_bound);
        }
        p.cell.bias_block_mut(Gate::Forget, dims.n).fill(1.0);
        p
    }

    pub fn check(&self) -> Result<()> {
        self.dims.validate()?;
        self.cell.check(self.dims)?;
        self.proj.check(self.dims)?;
        if let Some(name) = self
            .blocks()
            .iter()
            .zip(BLOCK_NAMES)
            .find(|(b, _)| b.iter().any(|v| !v.is_finite()))
            .map(|(_, n)| n)
        {
            return Err(VsmlError::NonFinite(name.to_string()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.param_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks(&self) -> [&[f64]; 5] {
        [
            &self.cell.input_weights,
            &self.cell.recurrent_weights,
            &self.cell.biases,
            &self.proj.forward,
            &self.proj.backward,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.cell.input_weights,
            &mut self.cell.recurrent_weights,
            &mut self.cell.biases,
            &mut self.proj.forward,
            &mut self.proj.backward,
        ]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for b in self.blocks() {
            out.extend_from_slice(b);
        }
        out
    }

    pub fn from_flat(dims: Dims, flat: &[f64]) -> Result<Self> {
        let mut p = MetaParams::zeros(dims);
        p.assign_flat(flat)?;
        Ok(p)
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("flat meta parameters", self.len(), flat.len())?;
        let mut offset = 0;
        for block in self.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Build from named blocks, e.g. as read from a checkpoint.
    pub fn from_blocks(dims: Dims, blocks: [Vec<f64>; 5]) -> Result<Self> {
        let [input_weights, recurrent_weights, biases, forward, backward] = blocks;
        let p = MetaParams {
            dims,
            cell: LstmCellParams {
                input_weights,
                recurrent_weights,
                biases,
            },
            proj: MessageProjections { forward, backward },
        };
        p.check()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scratch_param_count_is_about_2400() {
        // 4*16*16 + 4*16*16 + 64 + 8*16 + 8*16
        assert_eq!(Dims::scratch().param_count(), 2368);
        let p = MetaParams::zeros(Dims::scratch());
        assert_eq!(p.to_flat().len(), 2368);
    }

    #[test]
    fn init_sets_forget_bias_and_bounds() {
        let dims = Dims::new(5, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = MetaParams::init(dims, &mut rng);
        let n = dims.n;
        assert!(p.cell.biases[n..2 * n].iter().all(|&b| b == 1.0));
        let bound = 1.0 / 10f64.sqrt();
        assert!(p.cell.input_weights.iter().all(|v| v.abs() <= bound));
        assert!(p.proj.forward.iter().all(|v| v.abs() <= 1.0 / 5f64.sqrt()));
        p.check().unwrap();
    }

    #[test]
    fn flat_roundtrip() {
        let dims = Dims::new(4, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = MetaParams::init(dims, &mut rng);
        let q = MetaParams::from_flat(dims, &p.to_flat()).unwrap();
        assert_eq!(p, q);
        assert!(MetaParams::from_flat(dims, &[0.0; 3]).is_err());
    }

    #[test]
    fn non_finite_block_is_named() {
        let mut p = MetaParams::zeros(Dims::new(2, 1, 1));
        p.proj.backward[0] = f64::NAN;
        let err = p.check().unwrap_err();
        assert!(err.to_string().contains("backward_projection"));
    }
}
