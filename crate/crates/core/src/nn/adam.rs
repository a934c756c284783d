//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &AdamConfig) -> Result<(), NnError> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(NnError::ShapeMismatch(format!(
                "adam state {} vs params {} / grad {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        self.t += 1;
        let t = self.t as f64;
        let c1 = 1.0 - cfg.beta1.powf(t);
        let c2 = 1.0 - cfg.beta2.powf(t);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g;
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        Ok(())
    }
}
