use alloc::string::ToString;

use crate::error::{Error, Result};
use crate::params::ParamStore;

/// Adam with bias correction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    /// Applies one update to every trainable entry using the gradients
    /// currently in the store. The shared step counter advances once.
    ///
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&self, store: &mut ParamStore) -> Result<()> {
        for e in store.entries() {
            if e.trainable() && !e.grad.all_finite() {
                return Err(Error::Divergence {
                    param: e.name().to_string(),
                });
            }
        }
        let t = store.bump_step() as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for e in store.entries_mut() {
            if !e.trainable() {
                continue;
            }
            let n = e.value.len();
            for k in 0..n {
                let g = e.grad.data()[k];
                let m = self.beta1 * e.m.data()[k] + (1.0 - self.beta1) * g;
                let v = self.beta2 * e.v.data()[k] + (1.0 - self.beta2) * g * g;
                e.m.data_mut()[k] = m;
                e.v.data_mut()[k] = v;
                let m_hat = m / c1;
                let v_hat = v / c2;
                e.value.data_mut()[k] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}
