//! Adam with bias correction and inverse-time learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    /// Inverse-time decay coefficient; the rate used for update `t`
    /// (counting from zero) is `learning_rate / (1 + decay * t)`.
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, decay: f64) -> Self {
        Self {
            learning_rate,
            decay,
            ..Self::default()
        }
    }

    /// Learning rate after `t` completed updates.
    pub fn learning_rate_at(&self, t: u64) -> f64 {
        self.learning_rate / (1.0 + self.decay * t as f64)
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl Adam {
    /// Zeroed moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|p| Tensor::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            config,
            t: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step<'a, P>(&mut self, params: P, grads: &[Tensor]) -> Result<()>
    where
        P: IntoIterator<Item = &'a mut Tensor>,
    {
        let mut params: Vec<&mut Tensor> = params.into_iter().collect();
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::Contract(format!(
                "adam: {} parameters, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }

        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let lr = self.config.learning_rate_at(self.t);
        self.t += 1;
        let bias1 = 1.0 - beta1.powf(self.t as f64);
        let bias2 = 1.0 - beta2.powf(self.t as f64);

        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
