//! Advantage estimation closed forms and PPO update behavior.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use auv_hmappo::hmappo::{clipped_surrogate, compute_gae, ppo_update, PpoConfig, PpoSample};
use auv_hmappo::neural::{AdamState, GaussianPolicy, Mlp, Policy};

use common::*;

#[test]
fn two_step_example() {
    // δ1 = 1, δ0 = 1; A0 = 1 + 0.99 * 0.95 * 1
    let (a, g) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[false, false], 0.0, 0.99, 0.95).unwrap();
    assert!((a[0] - 1.9405).abs() < 1e-12);
    assert!((a[1] - 1.0).abs() < 1e-12);
    assert_eq!(a, g);
}

#[test]
fn bandit_reaches_ninety_percent() {
    for seed in [1, 2, 3] {
        let (updates, p) = bandit_updates_to_threshold(seed, 500);
        assert!(updates.is_some(), "seed {seed}: p = {p}");
    }
}

#[test]
fn empty_batch_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut actors = vec![GaussianPolicy::new(2, &[4], vec![-1.0], vec![1.0], 0.0, &mut rng)];
    let mut opts = vec![AdamState::new(actors[0].num_params(), 1e-3)];
    let mut critic = Mlp::new(&[2, 4, 1], 1.0, &mut rng);
    let mut copt = AdamState::new(critic.num_params(), 1e-3);
    assert!(ppo_update(&mut actors, &mut opts, &mut critic, &mut copt, &[], &PpoConfig::default(), &mut rng).is_err());
}

#[test]
fn critic_regresses_towards_returns() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut actors = vec![GaussianPolicy::new(2, &[4], vec![-1.0], vec![1.0], 0.0, &mut rng)];
    let mut opts = vec![AdamState::new(actors[0].num_params(), 1e-3)];
    let mut critic = Mlp::new(&[2, 16, 1], 1.0, &mut rng);
    let mut copt = AdamState::new(critic.num_params(), 1e-2);
    let samples: Vec<PpoSample> = (0..32)
        .map(|i| {
            let x = vec![(i as f64) / 16.0 - 1.0, 0.5];
            let a = vec![0.1];
            let lp = actors[0].log_prob(&x, &a).unwrap();
            PpoSample {
                actor_input: x.clone(),
                critic_input: x.clone(),
                action: a,
                log_prob: lp,
                advantage: x[0],
                ret: 2.0 * x[0],
                actor_index: 0,
            }
        })
        .collect();
    let cfg = PpoConfig::default();
    let first = ppo_update(&mut actors, &mut opts, &mut critic, &mut copt, &samples, &cfg, &mut rng).unwrap();
    let mut last = first;
    for _ in 0..50 {
        last = ppo_update(&mut actors, &mut opts, &mut critic, &mut copt, &samples, &cfg, &mut rng).unwrap();
    }
    assert!(last.value_loss < 0.1 * first.value_loss, "{} -> {}", first.value_loss, last.value_loss);
    assert_eq!(last.samples, 32);
}

#[test]
fn separate_actors_only_move_on_their_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let make = |rng: &mut ChaCha8Rng| GaussianPolicy::new(2, &[4], vec![-1.0], vec![1.0], 0.0, rng);
    let mut actors = vec![make(&mut rng), make(&mut rng)];
    let mut opts: Vec<AdamState> = actors.iter().map(|a| AdamState::new(a.num_params(), 1e-2)).collect();
    let mut critic = Mlp::new(&[2, 4, 1], 1.0, &mut rng);
    let mut copt = AdamState::new(critic.num_params(), 1e-2);
    let before = actors[1].params_vec();
    let x = vec![0.3, 0.1];
    let a = vec![0.4];
    let lp = actors[0].log_prob(&x, &a).unwrap();
    let samples = vec![
        PpoSample {
            actor_input: x.clone(),
            critic_input: x.clone(),
            action: a.clone(),
            log_prob: lp,
            advantage: 1.0,
            ret: 1.0,
            actor_index: 0,
        },
        PpoSample {
            actor_input: x.clone(),
            critic_input: x,
            action: a,
            log_prob: lp,
            advantage: -1.0,
            ret: 0.0,
            actor_index: 0,
        },
    ];
    ppo_update(&mut actors, &mut opts, &mut critic, &mut copt, &samples, &PpoConfig::default(), &mut rng).unwrap();
    assert_eq!(actors[1].params_vec(), before);
}

fn trajectory() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>, f64)> {
    (1usize..12).prop_flat_map(|n| {
        (
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(proptest::bool::weighted(0.2), n),
            -5.0f64..5.0,
        )
    })
}

proptest! {
    #[test]
    fn lambda_zero_is_td((r, v, d, boot) in trajectory(), gamma in 0.0f64..1.0) {
        let (a, g) = compute_gae(&r, &v, &d, boot, gamma, 0.0).unwrap();
        let td = td_errors(&r, &v, &d, boot, gamma);
        for t in 0..r.len() {
            prop_assert!((a[t] - td[t]).abs() <= 1e-12);
            prop_assert!((g[t] - (a[t] + v[t])).abs() <= 1e-12);
        }
    }

    #[test]
    fn lambda_one_is_monte_carlo((r, v, d, boot) in trajectory(), gamma in 0.0f64..1.0) {
        let (a, _) = compute_gae(&r, &v, &d, boot, gamma, 1.0).unwrap();
        let mc = mc_advantages(&r, &v, &d, boot, gamma);
        for t in 0..r.len() {
            prop_assert!((a[t] - mc[t]).abs() <= 1e-12 * (1.0 + mc[t].abs()), "{} vs {}", a[t], mc[t]);
        }
    }

    #[test]
    fn surrogate_is_pessimistic(ratio in 0.0f64..3.0, adv in -5.0f64..5.0, clip in 0.05f64..0.5) {
        let (v, d) = clipped_surrogate(ratio, adv, clip);
        prop_assert!(v <= ratio * adv + 1e-12);
        prop_assert!(v <= ratio.clamp(1.0 - clip, 1.0 + clip) * adv + 1e-12);
        // the gradient is either the unclipped slope or zero
        prop_assert!(d == adv || d == 0.0);
        if (ratio - 1.0).abs() < clip {
            prop_assert_eq!(d, adv);
        }
    }
}
