//! Dense tanh networks with exact backprop (hidden layers use tanh, the last
//! layer is linear and produces logits).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut l = DenseLayer::zeros(inputs, outputs);
        for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
            *v = rng.gen_range(-bound..=bound);
        }
        l
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
}

/// Activations of every layer: `acts[0]` is the input, `acts[k+1]` the
/// output of layer `k` (after tanh except for the last).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTape {
    pub acts: Vec<Vec<f64>>,
}

impl DenseTape {
    pub fn logits(&self) -> &[f64] {
        self.acts.last().expect("tape has at least the input")
    }
}

impl DenseNet {
    /// `widths = [input, hidden..., output]`.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        DenseNet {
            layers: widths.windows(2).map(|w| DenseLayer::init(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        DenseNet {
            layers: self.layers.iter().map(|l| DenseLayer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseTape> {
        check_len("dense input", self.input_dim(), x.len())?;
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut a = layer.apply(&acts[k]);
            if k < last {
                a.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(a);
        }
        Ok(DenseTape { acts })
    }

    /// Accumulate parameter gradients for upstream `dlogits` into `grads`;
    /// returns the gradient w.r.t. the input.
    pub fn backward(&self, tape: &DenseTape, dlogits: &[f64], grads: &mut DenseNet) -> Result<Vec<f64>> {
        check_len("dense upstream gradient", self.output_dim(), dlogits.len())?;
        check_len("dense tape", self.layers.len() + 1, tape.acts.len())?;
        let mut delta = dlogits.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            let input = &tape.acts[k];
            let mut dx = vec![0.0; layer.inputs];
            for (r, &d) in delta.iter().enumerate() {
                g.biases[r] += d;
                let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                let grow = &mut g.weights[r * layer.inputs..(r + 1) * layer.inputs];
                for c in 0..layer.inputs {
                    grow[c] += d * input[c];
                    dx[c] += d * row[c];
                }
            }
            if k > 0 {
                // input of layer k is tanh of the previous pre-activation
                for (d, &a) in dx.iter_mut().zip(input) {
                    *d *= 1.0 - a * a;
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("dense parameters", self.param_count(), flat.len())?;
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }
}
