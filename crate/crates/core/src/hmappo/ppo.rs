use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::NeuralError;
use crate::neural::{clip_grad_norm, AdamState, Mlp, Policy};

/// One stored decision, ready for a PPO update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoSample {
    pub actor_input: Vec<f64>,
    /// Critic input; for the AUV level this embeds the global observation.
    pub critic_input: Vec<f64>,
    pub action: Vec<f64>,
    /// Log-probability under the behavior policy.
    pub log_prob: f64,
    pub advantage: f64,
    /// Critic regression target.
    pub ret: f64,
    /// Which actor produced the action (0 when actors are shared).
    pub actor_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            epochs: 4,
            minibatches: 1,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub samples: usize,
    /// Mean clipped-surrogate loss (negated objective) over the last epoch.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean of old minus new log-probability over the last epoch.
    pub approx_kl: f64,
}

/// Per-sample clipped surrogate `min(r A, clip(r, 1-ε, 1+ε) A)` and its
/// derivative with respect to the ratio. The derivative is zero whenever the
/// clipped branch is the active minimum.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Clipped-surrogate PPO on a batch.
///
/// `actors[i]` is updated on the samples with `actor_index == i`; the critic
/// is regressed onto `ret` with a mean-squared error.
pub fn ppo_update<P: Policy, R: Rng + ?Sized>(
    actors: &mut [P],
    actor_opts: &mut [AdamState],
    critic: &mut Mlp,
    critic_opt: &mut AdamState,
    samples: &[PpoSample],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    if actor_opts.len() != actors.len() {
        return Err(NeuralError::Dimension {
            what: "actor optimizers",
            expected: actors.len(),
            got: actor_opts.len(),
        });
    }
    for s in samples {
        if s.actor_index >= actors.len() {
            return Err(NeuralError::Dimension {
                what: "actor index",
                expected: actors.len(),
                got: s.actor_index,
            });
        }
    }

    let advantages = if cfg.normalize_advantages {
        normalize(&samples.iter().map(|s| s.advantage).collect::<Vec<_>>())
    } else {
        samples.iter().map(|s| s.advantage).collect()
    };

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let chunks = cfg.minibatches.clamp(1, samples.len());
    let chunk_len = samples.len().div_ceil(chunks);
    let mut stats = UpdateStats {
        samples: samples.len(),
        ..UpdateStats::default()
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let last = epoch + 1 == cfg.epochs;
        let (mut pl, mut vl, mut ent, mut clipped, mut kl) = (0.0, 0.0, 0.0, 0usize, 0.0);
        for batch in order.chunks(chunk_len) {
            let m = batch.len() as f64;
            let mut actor_grads: Vec<Vec<f64>> = actors.iter().map(|a| vec![0.0; a.num_params()]).collect();
            let mut touched = vec![false; actors.len()];
            let mut critic_grad = vec![0.0; critic.num_params()];
            for &i in batch {
                let s = &samples[i];
                let a = advantages[i];
                let actor = &actors[s.actor_index];
                let new_lp = actor.log_prob(&s.actor_input, &s.action)?;
                let ratio = (new_lp - s.log_prob).exp();
                let (objective, d_ratio) = clipped_surrogate(ratio, a, cfg.clip);
                // d(-objective)/dθ = -d_ratio * ratio * dlogp/dθ
                let (_, h) = actor.accumulate_grad(
                    &s.actor_input,
                    &s.action,
                    -d_ratio * ratio / m,
                    -cfg.entropy_coef / m,
                    &mut actor_grads[s.actor_index],
                )?;
                touched[s.actor_index] = true;
                pl -= objective;
                ent += h;
                kl += s.log_prob - new_lp;
                if (ratio - 1.0).abs() > cfg.clip {
                    clipped += 1;
                }

                let (v, cache) = critic.forward(&s.critic_input)?;
                let err = v[0] - s.ret;
                vl += err * err;
                critic.backward(&cache, &[2.0 * err / m], &mut critic_grad)?;
            }
            for (k, actor) in actors.iter_mut().enumerate() {
                if touched[k] {
                    clip_grad_norm(&mut actor_grads[k], cfg.max_grad_norm);
                    actor.apply_gradient(&mut actor_opts[k], &actor_grads[k])?;
                }
            }
            clip_grad_norm(&mut critic_grad, cfg.max_grad_norm);
            let mut p = critic.params().to_vec();
            critic_opt.step(&mut p, &critic_grad)?;
            critic.params_mut().copy_from_slice(&p);
        }
        if last {
            let n = samples.len() as f64;
            stats.policy_loss = pl / n;
            stats.value_loss = vl / n;
            stats.entropy = ent / n;
            stats.clip_fraction = clipped as f64 / n;
            stats.approx_kl = kl / n;
        }
    }
    Ok(stats)
}

fn normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    x.iter().map(|v| (v - mean) / (std + 1e-8)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_identity_at_unit_ratio() {
        for a in [-2.0, 0.0, 3.0] {
            assert_eq!(clipped_surrogate(1.0, a, 0.2), (a, a));
        }
    }

    #[test]
    fn surrogate_clip_arithmetic() {
        let (v, d) = clipped_surrogate(1.5, 2.0, 0.2);
        assert!((v - 2.4).abs() < 1e-12);
        assert_eq!(d, 0.0);
        // negative advantage with a small ratio is clipped at 1 - ε
        let (v, d) = clipped_surrogate(0.5, -1.0, 0.2);
        assert!((v + 0.8).abs() < 1e-12);
        assert_eq!(d, 0.0);
        // pessimistic side keeps the gradient
        let (v, d) = clipped_surrogate(1.5, -1.0, 0.2);
        assert_eq!((v, d), (-1.5, -1.0));
    }

    #[test]
    fn normalized_advantages() {
        let z = normalize(&[1.0, 2.0, 3.0, 4.0]);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
        let var = z.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-6);
    }
}
