//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, VsmlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "beta1")]
    pub beta1: f64,
    #[serde(default = "beta2")]
    pub beta2: f64,
    #[serde(default = "eps")]
    pub eps: f64,
}

fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: beta1(),
            beta2: beta2(),
            eps: eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(VsmlError::config(format!("invalid Adam settings {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    /// Settings used for the ES meta-optimizer.
    fn default() -> Self {
        AdamConfig::with_lr(0.025)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        AdamState {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Descend: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_len("adam parameters", self.m.len(), params.len())?;
        check_len("adam gradients", self.m.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(VsmlError::NonFinite(format!("gradient entry {i}")));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut s = AdamState::new(AdamConfig::with_lr(0.01), 3);
        let mut p = vec![1.0, 1.0, 1.0];
        s.step(&mut p, &[0.5, -3.0, 1e-3]).unwrap();
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        assert!((p[0] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((p[1] - (1.0 + 0.01)).abs() < 1e-9);
        assert!((p[2] - (1.0 - 0.01 * 1e-3 / (1e-3 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_leave_params() {
        let mut s = AdamState::new(AdamConfig::with_lr(0.1), 2);
        let mut p = vec![0.3, -0.7];
        for _ in 0..100 {
            s.step(&mut p, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(p, vec![0.3, -0.7]);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        // With a constant gradient m_hat = g and v_hat = g^2 every step.
        let mut s = AdamState::new(AdamConfig::with_lr(0.05), 1);
        let mut p = vec![0.0];
        let mut prev = 0.0;
        for k in 1..=50 {
            s.step(&mut p, &[2.0]).unwrap();
            assert!(p[0] < prev);
            assert!((p[0] + 0.05 * k as f64).abs() < 1e-6);
            prev = p[0];
        }
    }

    #[test]
    fn update_is_linear_in_lr() {
        let g = [0.3, -1.2, 4.0];
        let run = |lr: f64| {
            let mut s = AdamState::new(AdamConfig::with_lr(lr), 3);
            let mut p = vec![0.0; 3];
            for _ in 0..5 {
                s.step(&mut p, &g).unwrap();
            }
            p
        };
        let a = run(1e-3);
        let b = run(1e-6);
        for (x, y) in a.iter().zip(&b) {
            assert!((x / y - 1000.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = AdamState::new(AdamConfig::default(), 2);
        let mut p = vec![0.0; 2];
        assert!(s.step(&mut p, &[f64::NAN, 0.0]).is_err());
        assert!(s.step(&mut p, &[0.0]).is_err());
    }
}
