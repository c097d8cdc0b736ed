//! The dense tanh network whose online backprop the VSML RNN is cloned from.
//!
//! Each layer mirrors the message averaging of a VSML layer:
//! `y_b = mean_a(tanh(x_a) w_ab + b_ab)` and the error sent down is
//! `e_a = mean_b(e_b w_ab (1 - tanh(x_a)^2))`. The update is
//! `w_ab -= alpha e_b tanh(x_a)`, `b_ab -= alpha e_b`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowLayer {
    pub a: usize,
    pub b: usize,
    /// `w[a * B + b]`.
    pub w: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ShadowLayer {
    pub fn init<R: Rng + ?Sized>(a: usize, b: usize, rng: &mut R) -> Self {
        ShadowLayer {
            a,
            b,
            w: (0..a * b).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            bias: (0..a * b).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.b];
        for (ai, &xa) in x.iter().enumerate() {
            let t = xa.tanh();
            for (bi, yb) in y.iter_mut().enumerate() {
                let k = ai * self.b + bi;
                *yb += t * self.w[k] + self.bias[k];
            }
        }
        let inv = 1.0 / self.a as f64;
        y.iter_mut().for_each(|v| *v *= inv);
        y
    }

    /// Error message for the layer below, from this layer's output error.
    pub fn backward(&self, x: &[f64], e: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.b as f64;
        x.iter()
            .enumerate()
            .map(|(ai, &xa)| {
                let d = 1.0 - xa.tanh().powi(2);
                e.iter().enumerate().map(|(bi, &eb)| eb * self.w[ai * self.b + bi] * d).sum::<f64>() * inv
            })
            .collect()
    }

    pub fn sgd(&mut self, x: &[f64], e: &[f64], alpha: f64) {
        for (ai, &xa) in x.iter().enumerate() {
            let t = xa.tanh();
            for (bi, &eb) in e.iter().enumerate() {
                let k = ai * self.b + bi;
                self.w[k] -= alpha * eb * t;
                self.bias[k] -= alpha * eb;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowNet {
    pub layers: Vec<ShadowLayer>,
    pub alpha: f64,
}

/// Inputs of every layer and the final logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowTape {
    pub inputs: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl ShadowNet {
    /// `widths = [input, hidden..., classes]`.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], alpha: f64, rng: &mut R) -> Self {
        ShadowNet {
            layers: widths.windows(2).map(|w| ShadowLayer::init(w[0], w[1], rng)).collect(),
            alpha,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ShadowTape> {
        check_len("shadow input", self.layers[0].a, x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for l in &self.layers {
            let next = l.forward(&cur);
            inputs.push(cur);
            cur = next;
        }
        Ok(ShadowTape { inputs, logits: cur })
    }

    /// Per-layer output errors, last layer first in the list order of layers.
    pub fn errors(&self, tape: &ShadowTape, e_out: &[f64]) -> Vec<Vec<f64>> {
        let k = self.layers.len();
        let mut errs = vec![Vec::new(); k];
        errs[k - 1] = e_out.to_vec();
        for l in (1..k).rev() {
            errs[l - 1] = self.layers[l].backward(&tape.inputs[l], &errs[l]);
        }
        errs
    }

    pub fn sgd(&mut self, tape: &ShadowTape, errs: &[Vec<f64>]) {
        let alpha = self.alpha;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer.sgd(&tape.inputs[l], &errs[l], alpha);
        }
    }
}
