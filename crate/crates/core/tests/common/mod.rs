//! Helpers shared by the integration tests: finite differences, closed-form
//! oracles and random environment rollouts.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use auv_hmappo::acoustics::{kl_divergence, path_loss};
use auv_hmappo::envsim::{Env, LowLevelAction, TraceRecord, WorldConfig};
use auv_hmappo::neural::{BernoulliPolicy, GaussianPolicy, Mlp, Policy};
use auv_hmappo::ocean::Vec3;

pub const FD_STEP: f64 = 1e-3;
/// Components smaller than this times the loss magnitude are compared
/// absolutely: a central difference cannot resolve them, its rounding error
/// being about machine epsilon * |loss| / step.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64, loss_scale: f64) -> f64 {
    let floor = FD_FLOOR * loss_scale.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Five-point central difference of `eval` around `x`. Being fourth order,
/// it tolerates a step large enough to keep rounding error far below the
/// tolerance.
fn central_diff(x: f64, mut eval: impl FnMut(f64) -> f64) -> f64 {
    let mut at = |k: f64| eval(x + k * FD_STEP);
    (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * FD_STEP)
}

/// Worst relative error of `d(c . y)/dθ` and `d(c . y)/dx` for one random
/// network, input and upstream vector.
pub fn mlp_instance_error(sizes: &[usize], rng: &mut ChaCha8Rng) -> f64 {
    let n = auv_hmappo::neural::param_count(sizes);
    let params = normal_vec(rng, n, 0.5);
    let x = normal_vec(rng, sizes[0], 1.0);
    let c = normal_vec(rng, *sizes.last().unwrap(), 1.0);
    let loss = |net: &Mlp, x: &[f64]| -> f64 { net.predict(x).unwrap().iter().zip(&c).map(|(y, c)| y * c).sum() };
    let mut net = Mlp::from_params(sizes, params.clone()).unwrap();
    let scale = loss(&net, &x);
    let (_, cache) = net.forward(&x).unwrap();
    let mut grad = vec![0.0; n];
    let dx = net.backward(&cache, &c, &mut grad).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let num = central_diff(params[i], |v| {
            net.params_mut()[i] = v;
            loss(&net, &x)
        });
        net.params_mut()[i] = params[i];
        worst = worst.max(rel_err(grad[i], num, scale));
    }
    let mut xv = x.clone();
    for i in 0..x.len() {
        let num = central_diff(x[i], |v| {
            xv[i] = v;
            loss(&net, &xv)
        });
        xv[i] = x[i];
        worst = worst.max(rel_err(dx[i], num, scale));
    }
    worst
}

/// Worst relative error of the gradient of `w_logp * log π(a|s) + w_ent * H`
/// with respect to every policy parameter.
pub fn policy_instance_error<P: Policy + Clone>(
    policy: &P,
    input: &[f64],
    action: &[f64],
    w_logp: f64,
    w_ent: f64,
) -> f64 {
    let mut params = policy.params_vec();
    let mut grad = vec![0.0; params.len()];
    policy.accumulate_grad(input, action, w_logp, w_ent, &mut grad).unwrap();
    let objective = |p: &P| {
        let lp = if w_logp != 0.0 { w_logp * p.log_prob(input, action).unwrap() } else { 0.0 };
        let ent = if w_ent != 0.0 { w_ent * p.entropy(input).unwrap() } else { 0.0 };
        lp + ent
    };
    let scale = objective(policy);
    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params[i];
        let num = central_diff(orig, |v| {
            params[i] = v;
            probe.set_params(&params).unwrap();
            objective(&probe)
        });
        params[i] = orig;
        worst = worst.max(rel_err(grad[i], num, scale));
    }
    worst
}

/// A Gaussian head shaped like the AUV actor (power log-scaled), with
/// randomized parameters.
pub fn random_gaussian(rng: &mut ChaCha8Rng, input: usize, hidden: &[usize]) -> GaussianPolicy {
    let mut g = GaussianPolicy::new(input, hidden, vec![0.01, -5.0, -5.0, -5.0], vec![2.0, 5.0, 5.0, 5.0], 0.0, rng)
        .with_log_scale(vec![true, false, false, false]);
    let n = g.num_params();
    let mut p = normal_vec(rng, n, 0.5);
    // keep log-std well above the floor, where the density is smooth
    let k = g.log_std.len();
    for v in &mut p[n - k..] {
        *v = v.clamp(-2.0, 1.0);
    }
    g.set_params(&p).unwrap();
    g
}

pub fn random_bernoulli(rng: &mut ChaCha8Rng, input: usize, hidden: &[usize], bits: usize) -> BernoulliPolicy {
    let mut b = BernoulliPolicy::new(input, hidden, bits, true, rng);
    let p = normal_vec(rng, b.num_params(), 0.5);
    b.set_params(&p).unwrap();
    b
}

/// Criterion-style sweep: 20 instances per shape, all gradient kinds.
/// Returns the worst relative error seen.
pub fn gradient_sweep(rng: &mut ChaCha8Rng, instances: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for sizes in [vec![3, 5, 2], vec![4, 8, 8, 3], vec![15, 64, 64, 4], vec![23, 64, 64, 5], vec![90, 64, 64, 1]] {
        for _ in 0..instances {
            worst = worst.max(mlp_instance_error(&sizes, rng));
        }
    }
    for _ in 0..instances {
        let g = random_gaussian(rng, 15, &[64, 64]);
        let x = normal_vec(rng, 15, 1.0);
        let a = normal_vec(rng, 4, 1.0);
        for (wl, we) in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.3)] {
            worst = worst.max(policy_instance_error(&g, &x, &a, wl, we));
        }
        let b = random_bernoulli(rng, 23, &[64, 64], 5);
        let x = normal_vec(rng, 23, 1.0);
        let bits: Vec<f64> = (0..5).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        for (wl, we) in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.3)] {
            worst = worst.max(policy_instance_error(&b, &x, &bits, wl, we));
        }
    }
    worst
}

/// λ = 0 closed form: one-step TD errors.
pub fn td_errors(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let next = if t + 1 < rewards.len() { values[t + 1] } else { bootstrap };
            let live = if dones[t] { 0.0 } else { 1.0 };
            rewards[t] + gamma * live * next - values[t]
        })
        .collect()
}

/// λ = 1 closed form: discounted Monte-Carlo return minus the baseline.
pub fn mc_advantages(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut g = 0.0;
            let mut disc = 1.0;
            let mut k = t;
            loop {
                g += disc * rewards[k];
                if dones[k] {
                    break;
                }
                disc *= gamma;
                if k + 1 == n {
                    g += disc * bootstrap;
                    break;
                }
                k += 1;
            }
            g - values[t]
        })
        .collect()
}

/// Two-armed bandit: one Bernoulli bit, reward 1 for choosing the arm.
/// Returns the number of PPO updates until P(arm) >= 0.9 (None if never
/// within `max_updates`) and the final probability.
pub fn bandit_updates_to_threshold(seed: u64, max_updates: usize) -> (Option<usize>, f64) {
    use auv_hmappo::hmappo::{ppo_update, PpoConfig, PpoSample};
    use auv_hmappo::neural::{bits_to_f64, AdamState, BernoulliPolicy, Mlp, Policy};
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actors = vec![BernoulliPolicy::new(1, &[8], 1, false, &mut rng)];
    let mut opts = vec![AdamState::new(actors[0].num_params(), 1e-2)];
    let mut critic = Mlp::new(&[1, 8, 1], 1.0, &mut rng);
    let mut critic_opt = AdamState::new(critic.num_params(), 1e-2);
    let cfg = PpoConfig::default();
    let input = [1.0];
    let mut p = actors[0].probabilities(&input).unwrap()[0];
    for update in 1..=max_updates {
        let v = critic.predict(&input).unwrap()[0];
        let samples: Vec<PpoSample> = (0..16)
            .map(|_| {
                let (bits, lp) = actors[0].sample(&input, &mut rng).unwrap();
                let r = if bits[0] { 1.0 } else { 0.0 };
                PpoSample {
                    actor_input: input.to_vec(),
                    critic_input: input.to_vec(),
                    action: bits_to_f64(&bits),
                    log_prob: lp,
                    advantage: r - v,
                    ret: r,
                    actor_index: 0,
                }
            })
            .collect();
        ppo_update(&mut actors, &mut opts, &mut critic, &mut critic_opt, &samples, &cfg, &mut rng).unwrap();
        p = actors[0].probabilities(&input).unwrap()[0];
        if p >= 0.9 {
            return (Some(update), p);
        }
    }
    (None, p)
}

pub fn random_selection(n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    loop {
        let s: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if s.iter().any(|&b| b) {
            return s;
        }
    }
}

pub fn random_action(cfg: &WorldConfig, rng: &mut ChaCha8Rng) -> LowLevelAction {
    let v = cfg.v_max * 1.2;
    LowLevelAction {
        power: rng.random_range(0.0..cfg.power_max * 1.1),
        velocity: Vec3::new(rng.random_range(-v..v), rng.random_range(-v..v), rng.random_range(-v..v)),
    }
}

/// One full episode with random teams and actions; returns the trace.
pub fn random_episode(env: &mut Env, seed: u64, rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    let cfg = env.config().clone();
    env.set_tracing(true);
    env.reset(seed);
    loop {
        let sel = random_selection(cfg.num_auvs, rng);
        let mut obs = env.begin_slot(&sel).unwrap();
        loop {
            let actions: Vec<_> = obs.iter().map(|_| random_action(&cfg, rng)).collect();
            let step = env.low_step(&actions).unwrap();
            obs = step.observations;
            if step.done {
                break;
            }
        }
        if env.end_slot().unwrap().episode_done {
            break;
        }
    }
    env.take_trace()
}

/// Covert flag from the traced positions and powers alone.
pub fn recompute_covert(record: &TraceRecord, cfg: &WorldConfig) -> bool {
    let a = &cfg.acoustic;
    let l = a.frequency_khz.log10();
    let psd_db = [
        17.0 - 30.0 * l,
        30.0 + 20.0 * a.shipping + 26.0 * l - 60.0 * (a.frequency_khz + 0.03).log10(),
        50.0 + 7.5 * a.wind_speed.sqrt() + 20.0 * l - 40.0 * (a.frequency_khz + 0.4).log10(),
        -15.0 + 20.0 * l,
    ];
    let noise: f64 = psd_db.iter().map(|db| 10f64.powf(db / 10.0)).sum::<f64>()
        * a.bandwidth_hz
        * 10f64.powf(a.noise_offset_db / 10.0);
    let gamma: f64 = record
        .auvs
        .iter()
        .filter(|t| t.power > 0.0)
        .map(|t| {
            let d = (t.position - cfg.eavesdropper_position).norm().max(1.0);
            t.power / path_loss(d, a).unwrap() / noise
        })
        .sum();
    let eps = cfg.covertness.epsilon_c;
    kl_divergence(gamma).unwrap() <= 2.0 * eps * eps
}
