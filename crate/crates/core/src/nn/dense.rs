use rand::Rng;

use super::ops::Activation;
use super::tensor::{Mat, ParamTensor, Parameterized};
use crate::error::{Error, Result};

/// Affine map followed by an elementwise activation. Weights are stored
/// `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    pub activation: Activation,
}

/// Values recorded by the forward pass that the backward pass needs.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: Vec<f64>,
}

/// Glorot-uniform weights, zero bias.
pub fn glorot_uniform<R: Rng + ?Sized>(name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> ParamTensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let values = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    ParamTensor::from_values(name, &[fan_out, fan_in], values).expect("finite glorot init")
}

/// `activation(W·x + b)` for a single input vector.
pub fn dense_forward(input: &[f64], weight: &ParamTensor, bias: &ParamTensor, activation: Activation) -> Result<DenseCache> {
    let shape = weight.shape();
    if shape.len() != 2 || shape[1] != input.len() {
        return Err(Error::shape("dense_forward", format!("input width {:?}", shape.get(1)), input.len()));
    }
    if bias.len() != shape[0] {
        return Err(Error::shape("dense_forward", format!("bias length {}", shape[0]), bias.len()));
    }
    let cols = shape[1];
    let pre: Vec<f64> = (0..shape[0])
        .map(|o| {
            let w = &weight.values[o * cols..(o + 1) * cols];
            bias.values[o] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    let output = pre.iter().map(|&x| activation.apply(x)).collect();
    Ok(DenseCache {
        input: input.to_vec(),
        pre,
        output,
    })
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(name: &str, fan_in: usize, fan_out: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weight: glorot_uniform(&format!("{name}.weight"), fan_in, fan_out, rng),
            bias: ParamTensor::zeros(format!("{name}.bias"), &[fan_out]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, input: &[f64]) -> Result<DenseCache> {
        dense_forward(input, &self.weight, &self.bias, self.activation)
    }

    /// Accumulates parameter gradients for `grad_out = dL/d output` and
    /// returns `dL/d input`.
    pub fn backward(&mut self, cache: &DenseCache, grad_out: &[f64]) -> Vec<f64> {
        let cols = self.in_dim();
        let mut grad_in = vec![0.0; cols];
        for (o, g) in grad_out.iter().enumerate() {
            let dz = g * self.activation.derivative(cache.pre[o], cache.output[o]);
            if dz == 0.0 {
                continue;
            }
            self.bias.grad[o] += dz;
            let w = &self.weight.values[o * cols..(o + 1) * cols];
            let gw = &mut self.weight.grad[o * cols..(o + 1) * cols];
            for c in 0..cols {
                gw[c] += dz * cache.input[c];
                grad_in[c] += dz * w[c];
            }
        }
        grad_in
    }

    /// Row-wise forward over a matrix of inputs.
    pub fn forward_rows(&self, input: &Mat) -> Result<(Mat, Vec<DenseCache>)> {
        let mut out = Mat::zeros(input.rows, self.out_dim());
        let mut caches = Vec::with_capacity(input.rows);
        for r in 0..input.rows {
            let c = self.forward(input.row(r))?;
            out.row_mut(r).copy_from_slice(&c.output);
            caches.push(c);
        }
        Ok((out, caches))
    }

    pub fn backward_rows(&mut self, caches: &[DenseCache], grad_out: &Mat) -> Mat {
        let mut grad_in = Mat::zeros(grad_out.rows, self.in_dim());
        for (r, cache) in caches.iter().enumerate() {
            let g = self.backward(cache, grad_out.row(r));
            grad_in.row_mut(r).copy_from_slice(&g);
        }
        grad_in
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
