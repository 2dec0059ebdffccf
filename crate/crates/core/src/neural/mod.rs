//! Dense networks with hand-written gradients, the Adam optimizer, and the
//! stochastic policy heads used by the trainer.

mod policy;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::NeuralError;

pub use policy::{
    bits_to_f64, log_sigmoid, sigmoid, softplus, BernoulliPolicy, GaussianPolicy, GaussianSample, Policy, LOG_STD_FLOOR,
};

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Parameters live in one flat vector, layer by layer, each layer stored as
/// its row-major `out x in` weight matrix followed by its bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    #[serde(skip)]
    generation: u64,
}

// The cache generation is bookkeeping, not part of the network.
impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.params == other.params
    }
}

/// Activations recorded by `forward`, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct MlpCache {
    generation: u64,
    /// Input of every layer: the network input, then each hidden tanh output.
    inputs: Vec<Vec<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. The output layer's weights are
    /// additionally scaled by `output_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an Mlp needs at least input and output widths");
        let layers = sizes.len() - 1;
        let mut params = Vec::with_capacity(param_count(sizes));
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let mut limit = (6.0 / (n_in + n_out) as f64).sqrt();
            if l + 1 == layers {
                limit *= output_gain;
            }
            for _ in 0..n_in * n_out {
                params.push(if limit > 0.0 { rng.random_range(-limit..limit) } else { 0.0 });
            }
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
            generation: 0,
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, NeuralError> {
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(NeuralError::Dimension {
                what: "parameter vector",
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            generation: 0,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access invalidates every cache produced so far.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.input_dim() {
            return Err(NeuralError::Dimension {
                what: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache), NeuralError> {
        self.check_input(x)?;
        let layers = self.sizes.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut h = x.to_vec();
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut z = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo += row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < layers {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            inputs.push(std::mem::replace(&mut h, z));
        }
        Ok((
            h,
            MlpCache {
                generation: self.generation,
                inputs,
            },
        ))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Reverse pass: adds dL/dθ into `grad` and returns dL/dx.
    pub fn backward(&self, cache: &MlpCache, dy: &[f64], grad: &mut [f64]) -> Result<Vec<f64>, NeuralError> {
        if cache.generation != self.generation || cache.inputs.len() + 1 != self.sizes.len() {
            return Err(NeuralError::StaleCache);
        }
        if dy.len() != self.output_dim() {
            return Err(NeuralError::Dimension {
                what: "output gradient",
                expected: self.output_dim(),
                got: dy.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(NeuralError::Dimension {
                what: "gradient buffer",
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut dz = dy.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.inputs[l];
            let mut dx = vec![0.0; n_in];
            for o in 0..n_out {
                let g = dz[o];
                if g == 0.0 {
                    continue;
                }
                let row = off + o * n_in;
                for i in 0..n_in {
                    grad[row + i] += g * input[i];
                    dx[i] += g * self.params[row + i];
                }
                grad[off + n_in * n_out + o] += g;
            }
            if l > 0 {
                for (d, h) in dx.iter_mut().zip(input) {
                    *d *= 1.0 - h * h;
                }
            }
            dz = dx;
        }
        Ok(dz)
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// One bias-corrected Adam step, descending along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NeuralError> {
        for (what, len) in [("parameters", params.len()), ("gradients", grads.len())] {
            if len != self.m.len() {
                return Err(NeuralError::Dimension {
                    what,
                    expected: self.m.len(),
                    got: len,
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}
