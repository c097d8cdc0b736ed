//! Running a cloned VSML RNN as an online learner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::shadow::ShadowLayer;
use super::{backward_sweep, decode, encode, forward_sweep, CLIP};
use crate::error::{Result, VsmlError};
use crate::grid::squash_output;
use crate::loss::{argmax, cross_entropy, cross_entropy_grad, softmax};
use crate::params::MetaParams;
use crate::tasks::{Episode, MetricTrace, StepRecord};

/// A VSML RNN whose sub-RNNs persist only the designated `(w, b)` slots.
#[derive(Debug, Clone)]
pub struct ClonedNet<'p> {
    pub params: &'p MetaParams,
    /// Persisted `(w, b)` per layer, in true (decoded) units.
    pub layers: Vec<ShadowLayer>,
    pub clip: Option<f64>,
}

/// Layer inputs recorded during a forward sweep, and the output logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ClonedPass {
    pub inputs: Vec<Vec<f64>>,
    pub raw: Vec<f64>,
    pub logits: Vec<f64>,
}

impl<'p> ClonedNet<'p> {
    /// `widths = [input, hidden..., classes]`; `(w, b)` drawn like a fresh
    /// shadow network.
    pub fn new(params: &'p MetaParams, widths: &[usize], seed: u64) -> Result<Self> {
        params.check()?;
        if widths.len() < 2 || widths.contains(&0) {
            return Err(VsmlError::config(format!("invalid cloned network widths {widths:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(ClonedNet {
            params,
            layers: widths.windows(2).map(|w| ShadowLayer::init(w[0], w[1], &mut rng)).collect(),
            clip: Some(CLIP),
        })
    }

    pub fn with_layers(params: &'p MetaParams, layers: Vec<ShadowLayer>) -> Self {
        ClonedNet {
            params,
            layers,
            clip: Some(CLIP),
        }
    }

    /// Layers `1..K`: every sub-RNN runs a forward sweep on its input slot,
    /// outputs are averaged over the first grid axis.
    pub fn forward(&self, x: &[f64]) -> Result<ClonedPass> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            if cur.len() != layer.a {
                return Err(VsmlError::Dimension {
                    what: "cloned layer input",
                    expected: layer.a,
                    actual: cur.len(),
                });
            }
            let mut y = vec![0.0; layer.b];
            for (a, &xa) in cur.iter().enumerate() {
                for (b, yb) in y.iter_mut().enumerate() {
                    let k = a * layer.b + b;
                    *yb += forward_sweep(self.params, xa, layer.w[k], layer.bias[k])?;
                }
            }
            let inv = 1.0 / layer.a as f64;
            y.iter_mut().for_each(|v| *v *= inv);
            inputs.push(cur);
            cur = y;
        }
        if let Some(i) = cur.iter().position(|v| !v.is_finite()) {
            return Err(VsmlError::NonFinite(format!("cloned network output {i}")));
        }
        let logits = cur.iter().map(|&v| squash_output(v)).collect();
        Ok(ClonedPass { inputs, raw: cur, logits })
    }

    /// Layers `K..1`: backward sweeps produce the updated `(w, b)` of every
    /// sub-RNN and the error passed down (averaged over the second axis).
    /// Returns the updated layers and each layer's output error.
    pub fn backward(&self, pass: &ClonedPass, e_out: &[f64]) -> Result<(Vec<ShadowLayer>, Vec<Vec<f64>>)> {
        let k = self.layers.len();
        let mut new_layers = self.layers.clone();
        let mut errs = vec![Vec::new(); k];
        let mut e = e_out.to_vec();
        for l in (0..k).rev() {
            let layer = &self.layers[l];
            let x = &pass.inputs[l];
            let mut e_prev = vec![0.0; layer.a];
            for (a, &xa) in x.iter().enumerate() {
                for (b, &eb) in e.iter().enumerate() {
                    let i = a * layer.b + b;
                    let (w2, b2, ep) = backward_sweep(self.params, xa, layer.w[i], layer.bias[i], eb)?;
                    new_layers[l].w[i] = self.clip_value(w2);
                    new_layers[l].bias[i] = self.clip_value(b2);
                    e_prev[a] += ep;
                }
            }
            let inv = 1.0 / layer.b as f64;
            e_prev.iter_mut().for_each(|v| *v *= inv);
            errs[l] = std::mem::replace(&mut e, e_prev);
        }
        for l in &new_layers {
            if l.w.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(VsmlError::NonFinite("cloned network state".into()));
            }
        }
        Ok((new_layers, errs))
    }

    fn clip_value(&self, v: f64) -> f64 {
        match self.clip {
            Some(c) => decode(encode(v).clamp(-c, c)),
            None => v,
        }
    }
}

/// Feed `episode` to a cloned learner in groups of `batch` examples. Each
/// example is predicted by the current network; the replicas' updated
/// `(w, b)` are then averaged. The trace has one record per example.
pub fn run_cloned_learner(
    params: &MetaParams,
    episode: &Episode,
    hidden: &[usize],
    batch: usize,
    seed: u64,
) -> Result<MetricTrace> {
    if batch == 0 {
        return Err(VsmlError::config("batch size must be positive"));
    }
    let mut widths = vec![episode.input_dim];
    widths.extend_from_slice(hidden);
    widths.push(episode.num_classes);
    let mut net = ClonedNet::new(params, &widths, seed)?;
    let mut trace = MetricTrace::default();
    for (chunk_index, chunk) in episode.examples.chunks(batch).enumerate() {
        let results: Vec<Result<(Vec<f64>, Vec<ShadowLayer>)>> = chunk
            .par_iter()
            .map(|ex| {
                let pass = net.forward(&ex.x)?;
                let probs = softmax(&pass.logits);
                let e = cross_entropy_grad(&probs, ex.label);
                let (layers, _) = net.backward(&pass, &e)?;
                Ok((pass.logits, layers))
            })
            .collect();
        let mut replicas = Vec::with_capacity(chunk.len());
        for (i, (r, ex)) in results.into_iter().zip(chunk).enumerate() {
            let step = chunk_index * batch + i;
            match r {
                Ok((logits, layers)) => {
                    let probs = softmax(&logits);
                    let predicted = argmax(&probs);
                    trace.push(StepRecord {
                        step,
                        loss: cross_entropy(&logits, ex.label),
                        correct: predicted == ex.label,
                        predicted,
                        label: ex.label,
                        probs,
                    });
                    replicas.push(layers);
                }
                Err(e) if e.is_numeric() => {
                    trace.fault = Some(format!("step {step}: {e}"));
                    return Ok(trace);
                }
                Err(e) => return Err(e),
            }
        }
        let inv = 1.0 / replicas.len() as f64;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            for i in 0..layer.w.len() {
                layer.w[i] = replicas.iter().map(|r| r[l].w[i]).sum::<f64>() * inv;
                layer.bias[i] = replicas.iter().map(|r| r[l].bias[i]).sum::<f64>() * inv;
            }
        }
    }
    Ok(trace)
}
