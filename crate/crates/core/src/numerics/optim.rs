use alloc::vec::Vec;

use super::ParamStore;
use crate::error::{contract_err, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// Adaptive moments with decoupled weight decay and a constant learning rate.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, store: &ParamStore) -> Self {
        let zeros = || store.iter().map(|(_, p)| alloc::vec![0.0; p.value.numel()]).collect();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients stored on `store`, then clears
    /// them. Parameters without a gradient are only decayed.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(contract_err!("optimizer built for {} parameters, store has {}", self.m.len(), store.len()));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, t as f64);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let p = store.get_mut(id);
            let grad = p.grad.take();
            let values = p.value.data_mut();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..values.len() {
                values[j] -= c.lr * c.weight_decay * values[j];
                if let Some(g) = &grad {
                    let g = g.data()[j];
                    m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                    v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                    let m_hat = m[j] / bc1;
                    let v_hat = v[j] / bc2;
                    values[j] -= c.lr * m_hat / (libm::sqrt(v_hat) + c.eps);
                }
            }
        }
        Ok(())
    }
}
