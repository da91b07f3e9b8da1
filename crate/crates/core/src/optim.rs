//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: step counter and one pair of moment buffers per
/// parameter, allocated on the first step.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to `params`, which must be passed in the same
    /// order on every call. Each parameter needs a populated gradient;
    /// `names` is used only for error messages.
    pub fn step(&mut self, params: &mut [&mut Tensor], names: &[String]) -> Result<()> {
        let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
        if let Some(i) = params.iter().position(|p| p.grad().is_none()) {
            return Err(Error::Contract(format!(
                "parameter {} has no gradient",
                name(i)
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        if let Some(i) = params
            .iter()
            .zip(&self.m)
            .position(|(p, m)| p.len() != m.len())
        {
            return Err(Error::Contract(format!(
                "parameter {} changed size",
                name(i)
            )));
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let (values, grad) = p.values_and_grad_mut();
            let grad = grad.expect("checked above");
            for (((theta, &g), m), v) in values
                .iter_mut()
                .zip(grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
