//! Stateless numerical kernels with hand-written reverse passes.

use super::tensor::Mat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y` (and the
    /// pre-activation `x` for relu).
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Vector-Jacobian product of softmax: given `p = softmax(x)` and `dL/dp`,
/// returns `dL/dx`.
pub fn softmax_backward(probs: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(grad_out).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(grad_out)
        .map(|(p, g)| p * (g - inner))
        .collect()
}

/// Shannon entropy `-Σ p ln p` of a distribution, from its log-probabilities.
pub fn entropy_from_log_probs(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|&lp| lp.exp() * lp).sum::<f64>()
}

/// Gradient of the entropy w.r.t. the logits that produced `log_probs`:
/// `dH/dx_k = -p_k (ln p_k + H)`.
pub fn entropy_logit_grad(log_probs: &[f64]) -> Vec<f64> {
    let h = entropy_from_log_probs(log_probs);
    log_probs.iter().map(|&lp| -lp.exp() * (lp + h)).collect()
}

/// Binary cross-entropy of a logit against a 0/1 target, computed stably.
pub fn bce_with_logit(logit: f64, target: bool) -> f64 {
    // log(1 + e^x) - t*x
    let softplus = if logit > 0.0 {
        logit + (-logit).exp().ln_1p()
    } else {
        logit.exp().ln_1p()
    };
    softplus - if target { logit } else { 0.0 }
}

/// `d bce / d logit`.
pub fn bce_logit_grad(logit: f64, target: bool) -> f64 {
    sigmoid(logit) - if target { 1.0 } else { 0.0 }
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    /// Row-stochastic attention weights, `queries × keys`.
    pub weights: Mat,
}

pub struct AttentionGrads {
    pub queries: Mat,
    pub keys: Mat,
    pub values: Mat,
}

fn check_attention_shapes(q: &Mat, k: &Mat, v: &Mat) -> Result<()> {
    if q.cols != k.cols {
        return Err(Error::shape("attention", format!("key width {}", q.cols), k.cols));
    }
    if k.rows != v.rows {
        return Err(Error::shape("attention", format!("value rows {}", k.rows), v.rows));
    }
    if k.rows == 0 {
        return Err(Error::shape("attention", "at least one key", 0));
    }
    Ok(())
}

/// Scaled dot-product attention `softmax(Q Kᵀ · scale) V`, row-wise. With
/// `causal`, query row `i` only attends to key rows `0..=i`.
pub fn attention(q: &Mat, k: &Mat, v: &Mat, scale: f64, causal: bool) -> Result<(Mat, AttentionCache)> {
    check_attention_shapes(q, k, v)?;
    let mut scores = q.matmul_t(k)?;
    for i in 0..scores.rows {
        let visible = if causal { (i + 1).min(k.rows) } else { k.rows };
        let row = scores.row_mut(i);
        let probs = softmax(&row[..visible].iter().map(|s| s * scale).collect::<Vec<_>>());
        row[..visible].copy_from_slice(&probs);
        row[visible..].iter_mut().for_each(|w| *w = 0.0);
    }
    let out = scores.matmul(v)?;
    Ok((out, AttentionCache { weights: scores }))
}

pub fn attention_backward(
    q: &Mat,
    k: &Mat,
    v: &Mat,
    cache: &AttentionCache,
    scale: f64,
    grad_out: &Mat,
) -> Result<AttentionGrads> {
    check_attention_shapes(q, k, v)?;
    let w = &cache.weights;
    let d_values = w.t_matmul(grad_out)?;
    let d_weights = grad_out.matmul_t(v)?;
    let mut d_scores = Mat::zeros(w.rows, w.cols);
    for i in 0..w.rows {
        let g = softmax_backward(w.row(i), d_weights.row(i));
        for (d, gi) in d_scores.row_mut(i).iter_mut().zip(g) {
            *d = gi * scale;
        }
    }
    Ok(AttentionGrads {
        queries: d_scores.matmul(k)?,
        keys: d_scores.t_matmul(q)?,
        values: d_values,
    })
}
