use super::tensor::ParamTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Bias-corrected Adam. Moment buffers are created lazily on the first step
/// and keyed by parameter position, so the same parameter list must be passed
/// in the same order every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub hyper: AdamHyper,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(hyper: AdamHyper) -> Self {
        Self {
            hyper,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.first, &self.second)
    }

    /// Restores optimizer state, e.g. from a checkpoint.
    pub fn restore(hyper: AdamHyper, step: u64, first: Vec<Vec<f64>>, second: Vec<Vec<f64>>) -> Result<Self> {
        if first.len() != second.len() || first.iter().zip(&second).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Checkpoint("adam moment buffers disagree in shape".into()));
        }
        Ok(Self {
            hyper,
            step,
            first,
            second,
        })
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    /// A non-finite gradient aborts the update before any parameter changes
    /// and leaves the gradients in place for inspection.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        for p in params.iter() {
            if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of `{}` at index {i} is {}",
                    p.name(),
                    p.grad[i]
                )));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != params.len() || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::shape(
                "Adam::step",
                format!("{} tensors", self.first.len()),
                params.len(),
            ));
        }
        self.step += 1;
        let AdamHyper { lr, beta1, beta2, eps } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.values.len() {
                let g = p.grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}
