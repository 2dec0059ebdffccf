use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AdamState, Mlp};
use crate::error::NeuralError;

/// Smallest log standard deviation a Gaussian head will use (std 1e-3).
pub const LOG_STD_FLOOR: f64 = -6.907755278982137;

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// ln(1 - tanh(u)^2), stable for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// A stochastic policy whose log-density and entropy can be differentiated
/// with respect to a flat parameter vector.
///
/// Actions are stored as `f64` vectors: pre-squash Gaussian samples for
/// continuous heads, 0/1 bits for Bernoulli heads.
pub trait Policy {
    fn input_dim(&self) -> usize;
    fn num_params(&self) -> usize;
    fn params_vec(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<(), NeuralError>;
    fn log_prob(&self, input: &[f64], action: &[f64]) -> Result<f64, NeuralError>;
    fn entropy(&self, input: &[f64]) -> Result<f64, NeuralError>;

    /// Adds the gradient of `w_logp * log_prob + w_entropy * entropy` into
    /// `grad` and returns `(log_prob, entropy)`.
    fn accumulate_grad(
        &self,
        input: &[f64],
        action: &[f64],
        w_logp: f64,
        w_entropy: f64,
        grad: &mut [f64],
    ) -> Result<(f64, f64), NeuralError>;

    /// Descends along `grad` with Adam.
    fn apply_gradient(&mut self, adam: &mut AdamState, grad: &[f64]) -> Result<(), NeuralError> {
        let mut p = self.params_vec();
        adam.step(&mut p, grad)?;
        self.set_params(&p)
    }
}

/// Diagonal Gaussian in an unbounded space, squashed by tanh and mapped onto
/// `[low, high]` per dimension: affinely, or geometrically for dimensions
/// flagged in `log_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    /// Empty means every dimension is affine.
    #[serde(default)]
    pub log_scale: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub pre_squash: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        low: Vec<f64>,
        high: Vec<f64>,
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        assert_eq!(low.len(), high.len());
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(low.len());
        Self {
            net: Mlp::new(&sizes, 0.01, rng),
            log_std: vec![init_log_std; low.len()],
            low,
            high,
            log_scale: Vec::new(),
        }
    }

    /// Maps the flagged dimensions geometrically; their bounds must be positive.
    pub fn with_log_scale(mut self, flags: Vec<bool>) -> Self {
        assert_eq!(flags.len(), self.low.len());
        for (i, &f) in flags.iter().enumerate() {
            assert!(!f || self.low[i] > 0.0, "log-scaled dimension needs a positive lower bound");
        }
        self.log_scale = flags;
        self
    }

    fn is_log(&self, i: usize) -> bool {
        self.log_scale.get(i).copied().unwrap_or(false)
    }

    pub fn action_dim(&self) -> usize {
        self.low.len()
    }

    fn effective_log_std(&self, i: usize) -> f64 {
        self.log_std[i].max(LOG_STD_FLOOR)
    }

    pub fn std(&self) -> Vec<f64> {
        (0..self.action_dim()).map(|i| self.effective_log_std(i).exp()).collect()
    }

    pub fn squash(&self, pre: &[f64]) -> Vec<f64> {
        pre.iter()
            .enumerate()
            .map(|(i, u)| {
                let s = 0.5 * (u.tanh() + 1.0);
                if self.is_log(i) {
                    self.low[i] * (s * (self.high[i] / self.low[i]).ln()).exp()
                } else {
                    self.low[i] + s * (self.high[i] - self.low[i])
                }
            })
            .collect()
    }

    pub fn mean(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.net.predict(input)
    }

    /// Deterministic action: the squashed mean.
    pub fn mean_action(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        Ok(self.squash(&self.mean(input)?))
    }

    pub fn sample<R: Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> Result<GaussianSample, NeuralError> {
        let mean = self.mean(input)?;
        let pre: Vec<f64> = mean
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let z: f64 = rng.sample(StandardNormal);
                m + self.effective_log_std(i).exp() * z
            })
            .collect();
        let log_prob = self.log_prob_given_mean(&mean, &pre);
        Ok(GaussianSample {
            action: self.squash(&pre),
            pre_squash: pre,
            log_prob,
        })
    }

    fn log_prob_given_mean(&self, mean: &[f64], pre: &[f64]) -> f64 {
        let mut lp = 0.0;
        for i in 0..mean.len() {
            let log_std = self.effective_log_std(i);
            let z = (pre[i] - mean[i]) / log_std.exp();
            lp += -0.5 * z * z - log_std - 0.5 * (2.0 * PI).ln();
            // minus ln |d action / d pre|
            lp -= log_one_minus_tanh_sq(pre[i]);
            if self.is_log(i) {
                let log_ratio = (self.high[i] / self.low[i]).ln();
                let s = 0.5 * (pre[i].tanh() + 1.0);
                lp -= self.low[i].ln() + s * log_ratio + (0.5 * log_ratio).ln();
            } else {
                lp -= (0.5 * (self.high[i] - self.low[i])).ln();
            }
        }
        lp
    }
}

impl Policy for GaussianPolicy {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn num_params(&self) -> usize {
        self.net.num_params() + self.log_std.len()
    }

    fn params_vec(&self) -> Vec<f64> {
        let mut p = self.net.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.num_params() {
            return Err(NeuralError::Dimension {
                what: "policy parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let n = self.net.num_params();
        self.net.params_mut().copy_from_slice(&params[..n]);
        self.log_std.copy_from_slice(&params[n..]);
        Ok(())
    }

    fn log_prob(&self, input: &[f64], action: &[f64]) -> Result<f64, NeuralError> {
        check_action(action, self.action_dim())?;
        Ok(self.log_prob_given_mean(&self.mean(input)?, action))
    }

    fn entropy(&self, _input: &[f64]) -> Result<f64, NeuralError> {
        // Entropy of the pre-squash Gaussian; the squashed entropy has no closed form.
        let c = 0.5 * (2.0 * PI * std::f64::consts::E).ln();
        Ok((0..self.action_dim()).map(|i| c + self.effective_log_std(i)).sum())
    }

    fn accumulate_grad(
        &self,
        input: &[f64],
        action: &[f64],
        w_logp: f64,
        w_entropy: f64,
        grad: &mut [f64],
    ) -> Result<(f64, f64), NeuralError> {
        check_action(action, self.action_dim())?;
        if grad.len() != self.num_params() {
            return Err(NeuralError::Dimension {
                what: "gradient buffer",
                expected: self.num_params(),
                got: grad.len(),
            });
        }
        let (mean, cache) = self.net.forward(input)?;
        let n = self.net.num_params();
        let mut d_mean = vec![0.0; mean.len()];
        for i in 0..mean.len() {
            let sigma = self.effective_log_std(i).exp();
            let z = (action[i] - mean[i]) / sigma;
            d_mean[i] = w_logp * z / sigma;
            if self.log_std[i] > LOG_STD_FLOOR {
                grad[n + i] += w_logp * (z * z - 1.0) + w_entropy;
            }
        }
        self.net.backward(&cache, &d_mean, &mut grad[..n])?;
        Ok((self.log_prob_given_mean(&mean, action), self.entropy(input)?))
    }
}

/// Independent Bernoulli bits with state-dependent logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliPolicy {
    pub net: Mlp,
    /// Redraw all-zero samples (up to 10 times, then force the likeliest bit).
    pub nonempty: bool,
}

const MAX_REDRAWS: usize = 10;

impl BernoulliPolicy {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], bits: usize, nonempty: bool, rng: &mut R) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(bits);
        Self {
            net: Mlp::new(&sizes, 0.01, rng),
            nonempty,
        }
    }

    pub fn bits(&self) -> usize {
        self.net.output_dim()
    }

    pub fn probabilities(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        Ok(self.net.predict(input)?.into_iter().map(sigmoid).collect())
    }

    /// Draws a selection and returns it with its joint log-probability
    /// (sum of the per-bit log-probabilities).
    pub fn sample<R: Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> Result<(Vec<bool>, f64), NeuralError> {
        let logits = self.net.predict(input)?;
        let mut bits = draw(&logits, rng);
        if self.nonempty {
            let mut redraws = 0;
            while !bits.iter().any(|&b| b) && redraws < MAX_REDRAWS {
                bits = draw(&logits, rng);
                redraws += 1;
            }
            if !bits.iter().any(|&b| b) {
                bits[argmax(&logits)] = true;
            }
        }
        let lp = bits_log_prob(&logits, &bits_to_f64(&bits));
        Ok((bits, lp))
    }

    /// Deterministic selection: every bit with probability above ½, or the
    /// likeliest bit when that would select nobody.
    pub fn greedy(&self, input: &[f64]) -> Result<Vec<bool>, NeuralError> {
        let logits = self.net.predict(input)?;
        let mut bits: Vec<bool> = logits.iter().map(|&l| l > 0.0).collect();
        if self.nonempty && !bits.iter().any(|&b| b) {
            bits[argmax(&logits)] = true;
        }
        Ok(bits)
    }
}

fn draw<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> Vec<bool> {
    logits.iter().map(|&l| rng.random::<f64>() < sigmoid(l)).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn bits_to_f64(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

fn bits_log_prob(logits: &[f64], bits: &[f64]) -> f64 {
    logits
        .iter()
        .zip(bits)
        .map(|(&l, &b)| b * log_sigmoid(l) + (1.0 - b) * log_sigmoid(-l))
        .sum()
}

fn bits_entropy(logits: &[f64]) -> f64 {
    logits
        .iter()
        .map(|&l| {
            let p = sigmoid(l);
            p * softplus(-l) + (1.0 - p) * softplus(l)
        })
        .sum()
}

fn check_action(action: &[f64], dim: usize) -> Result<(), NeuralError> {
    if action.len() != dim {
        return Err(NeuralError::Dimension {
            what: "action",
            expected: dim,
            got: action.len(),
        });
    }
    Ok(())
}

impl Policy for BernoulliPolicy {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn num_params(&self) -> usize {
        self.net.num_params()
    }

    fn params_vec(&self) -> Vec<f64> {
        self.net.params().to_vec()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.num_params() {
            return Err(NeuralError::Dimension {
                what: "policy parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        self.net.params_mut().copy_from_slice(params);
        Ok(())
    }

    fn log_prob(&self, input: &[f64], action: &[f64]) -> Result<f64, NeuralError> {
        check_action(action, self.bits())?;
        Ok(bits_log_prob(&self.net.predict(input)?, action))
    }

    fn entropy(&self, input: &[f64]) -> Result<f64, NeuralError> {
        Ok(bits_entropy(&self.net.predict(input)?))
    }

    fn accumulate_grad(
        &self,
        input: &[f64],
        action: &[f64],
        w_logp: f64,
        w_entropy: f64,
        grad: &mut [f64],
    ) -> Result<(f64, f64), NeuralError> {
        check_action(action, self.bits())?;
        let (logits, cache) = self.net.forward(input)?;
        let d_logits: Vec<f64> = logits
            .iter()
            .zip(action)
            .map(|(&l, &b)| {
                let p = sigmoid(l);
                w_logp * (b - p) - w_entropy * l * p * (1.0 - p)
            })
            .collect();
        self.net.backward(&cache, &d_logits, grad)?;
        Ok((bits_log_prob(&logits, action), bits_entropy(&logits)))
    }
}
