use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gae::compute_gae;
use super::ppo::{ppo_update, PpoConfig, PpoSample, UpdateStats};
use crate::envsim::{critic_input, Env, LowLevelAction, LowLevelObs, WorldConfig, OBS_DIM};
use crate::error::{ConfigError, DomainError, NeuralError, TrainError};
use crate::neural::{AdamState, BernoulliPolicy, GaussianPolicy, Mlp, Policy};
use crate::ocean::Vec3;

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Learning hyperparameters. Defaults are the full-scale profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Learning rates of the AUV actors and the centralized critic.
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Learning rates of the central AUV's selection policy and its critic.
    pub central_lr_actor: f64,
    pub central_lr_critic: f64,
    pub gamma: f64,
    pub clip: f64,
    pub gae_lambda: f64,
    /// AUV-level update fires once this many transitions are buffered.
    pub batch_auv: usize,
    /// Central-level update fires once this many slot transitions are buffered.
    pub batch_central: usize,
    pub epochs: usize,
    pub auv_minibatches: usize,
    pub central_minibatches: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
    /// One actor network for every AUV; otherwise one per AUV.
    pub shared_actor: bool,
    /// Initial log standard deviation of the continuous head (pre-squash).
    pub init_log_std: f64,
    /// Map the power output geometrically between P_min and P_max.
    pub log_power: bool,
    pub seed: u64,
    /// Write a checkpoint every this many episodes (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            lr_actor: 3e-5,
            lr_critic: 5e-5,
            central_lr_actor: 3e-5,
            central_lr_critic: 5e-5,
            gamma: 0.99,
            clip: 0.2,
            gae_lambda: 0.95,
            batch_auv: 512,
            batch_central: 16,
            epochs: 4,
            auv_minibatches: 4,
            central_minibatches: 1,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            hidden: vec![64, 64],
            shared_actor: true,
            init_log_std: 0.0,
            log_power: true,
            seed: 0,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    /// Short laptop-scale profile.
    pub fn desk() -> Self {
        Self {
            episodes: 300,
            lr_actor: 3e-4,
            lr_critic: 1e-3,
            central_lr_actor: 1e-3,
            central_lr_critic: 1e-3,
            checkpoint_every: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invariant(m.to_string()));
        if !(self.lr_actor > 0.0
            && self.lr_critic > 0.0
            && self.central_lr_actor > 0.0
            && self.central_lr_critic > 0.0)
        {
            return bad("learning rates must be > 0");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must be in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be > 0");
        }
        if self.batch_auv == 0 || self.batch_central == 0 || self.epochs == 0 {
            return bad("batch sizes and epochs must be >= 1");
        }
        if self.auv_minibatches == 0 || self.central_minibatches == 0 {
            return bad("minibatch counts must be >= 1");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer widths must be non-empty and >= 1");
        }
        if !(self.max_grad_norm > 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("max_grad_norm > 0 and entropy_coef >= 0 required");
        }
        Ok(())
    }

    fn ppo(&self, minibatches: usize) -> PpoConfig {
        PpoConfig {
            clip: self.clip,
            epochs: self.epochs,
            minibatches,
            entropy_coef: self.entropy_coef,
            max_grad_norm: self.max_grad_norm,
            normalize_advantages: self.normalize_advantages,
        }
    }
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub high_reward_avg: f64,
    pub low_reward_avg: f64,
    pub coverage: f64,
    pub task_delay: f64,
    pub efficiency: f64,
    pub covert_fraction: f64,
    pub completion_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    Central,
    Auv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub episode: usize,
    pub level: Level,
    pub stats: UpdateStats,
    /// Buffer length right after the update (always 0).
    pub buffer_len_after: usize,
}

/// Actors only: everything needed to act, nothing a critic sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policies {
    pub central: BernoulliPolicy,
    pub auv_actors: Vec<GaussianPolicy>,
}

impl Policies {
    pub fn auv_actor(&self, auv: usize) -> &GaussianPolicy {
        if self.auv_actors.len() == 1 {
            &self.auv_actors[0]
        } else {
            &self.auv_actors[auv]
        }
    }
}

/// One AUV's contiguous run of decisions within a slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentSegment {
    pub actor_index: usize,
    pub actor_inputs: Vec<Vec<f64>>,
    pub critic_inputs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic value after the last decision (slot ends are truncations).
    pub bootstrap_value: f64,
}

/// Turns a segment into PPO samples, with advantages and returns from GAE.
pub fn segment_samples(seg: &AgentSegment, gamma: f64, lambda: f64) -> Result<Vec<PpoSample>, DomainError> {
    let n = seg.rewards.len();
    for (what, len) in [
        ("actor inputs", seg.actor_inputs.len()),
        ("critic inputs", seg.critic_inputs.len()),
        ("actions", seg.actions.len()),
        ("log-probs", seg.log_probs.len()),
    ] {
        if len != n {
            return Err(DomainError::LengthMismatch { what, expected: n, got: len });
        }
    }
    let (adv, ret) = compute_gae(&seg.rewards, &seg.values, &seg.dones, seg.bootstrap_value, gamma, lambda)?;
    Ok((0..n)
        .map(|t| PpoSample {
            actor_input: seg.actor_inputs[t].clone(),
            critic_input: seg.critic_inputs[t].clone(),
            action: seg.actions[t].clone(),
            log_prob: seg.log_probs[t],
            advantage: adv[t],
            ret: ret[t],
            actor_index: seg.actor_index,
        })
        .collect())
}

/// Multi-agent PPO with one centralized critic: per-agent advantages come
/// from the shared critic's values, each actor follows its own ratios, and
/// the critic regresses onto the joint-observation returns.
#[allow(clippy::too_many_arguments)]
pub fn mappo_update<R: rand::Rng + ?Sized>(
    actors: &mut [GaussianPolicy],
    actor_opts: &mut [AdamState],
    critic: &mut Mlp,
    critic_opt: &mut AdamState,
    segments: &[AgentSegment],
    gamma: f64,
    lambda: f64,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, TrainError> {
    let mut samples = Vec::new();
    for seg in segments {
        samples.extend(segment_samples(seg, gamma, lambda)?);
    }
    Ok(ppo_update(actors, actor_opts, critic, critic_opt, &samples, cfg, rng)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PendingSlot {
    state: Vec<f64>,
    action: Vec<f64>,
    log_prob: f64,
    reward: f64,
    value: f64,
}

/// Everything needed to continue a run bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub crate_version: String,
    pub episodes_done: usize,
    pub world: WorldConfig,
    pub train: TrainConfig,
    pub central: BernoulliPolicy,
    pub central_opt: AdamState,
    pub central_critic: Mlp,
    pub central_critic_opt: AdamState,
    pub auv_actors: Vec<GaussianPolicy>,
    pub auv_opts: Vec<AdamState>,
    pub auv_critic: Mlp,
    pub auv_critic_opt: AdamState,
    pub rng: ChaCha8Rng,
    pub low_buffer: Vec<PpoSample>,
    pub high_buffer: Vec<PpoSample>,
    pending_high: Vec<PendingSlot>,
    pub updates: Vec<UpdateRecord>,
    pub low_transitions: usize,
    pub high_transitions: usize,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(TrainError::Checkpoint(format!(
                "unsupported checkpoint format {} (expected {CHECKPOINT_FORMAT})",
                ckpt.format
            )));
        }
        Ok(ckpt)
    }

    pub fn policies(&self) -> Policies {
        Policies {
            central: self.central.clone(),
            auv_actors: self.auv_actors.clone(),
        }
    }
}

/// Seed of the environment for a given training episode.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    splitmix64(seed ^ splitmix64(episode as u64 + 1))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn to_env_action(a: &[f64]) -> LowLevelAction {
    LowLevelAction {
        power: a[0],
        velocity: Vec3::new(a[1], a[2], a[3]),
    }
}

pub(crate) fn auv_action_bounds(world: &WorldConfig) -> (Vec<f64>, Vec<f64>) {
    let v = world.v_max;
    (vec![world.power_min, -v, -v, -v], vec![world.power_max, v, v, v])
}

/// Dual-timescale trainer: a Bernoulli team-selection policy per slot and
/// parameter-shared (or per-AUV) continuous actors per slice.
pub struct Trainer {
    world: WorldConfig,
    cfg: TrainConfig,
    env: Env,
    central: BernoulliPolicy,
    central_opt: AdamState,
    central_critic: Mlp,
    central_critic_opt: AdamState,
    auv_actors: Vec<GaussianPolicy>,
    auv_opts: Vec<AdamState>,
    auv_critic: Mlp,
    auv_critic_opt: AdamState,
    rng: ChaCha8Rng,
    episode: usize,
    low_buffer: Vec<PpoSample>,
    high_buffer: Vec<PpoSample>,
    pending_high: Vec<PendingSlot>,
    updates: Vec<UpdateRecord>,
    low_transitions: usize,
    high_transitions: usize,
}

impl Trainer {
    pub fn new(world: WorldConfig, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let env = Env::new(world.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = world.num_auvs;
        let central = BernoulliPolicy::new(world.state_dim(), &cfg.hidden, n, true, &mut rng);
        let central_critic = Mlp::new(&sizes(world.state_dim(), &cfg.hidden, 1), 1.0, &mut rng);
        let (low, high) = auv_action_bounds(&world);
        let actor_count = if cfg.shared_actor { 1 } else { n };
        let auv_actors: Vec<GaussianPolicy> = (0..actor_count)
            .map(|_| {
                GaussianPolicy::new(OBS_DIM, &cfg.hidden, low.clone(), high.clone(), cfg.init_log_std, &mut rng)
                    .with_log_scale(vec![cfg.log_power, false, false, false])
            })
            .collect();
        let auv_critic = Mlp::new(&sizes(world.critic_input_dim(), &cfg.hidden, 1), 1.0, &mut rng);
        Ok(Self {
            central_opt: AdamState::new(central.num_params(), cfg.central_lr_actor),
            central_critic_opt: AdamState::new(central_critic.num_params(), cfg.central_lr_critic),
            auv_opts: auv_actors
                .iter()
                .map(|a| AdamState::new(a.num_params(), cfg.lr_actor))
                .collect(),
            auv_critic_opt: AdamState::new(auv_critic.num_params(), cfg.lr_critic),
            central,
            central_critic,
            auv_actors,
            auv_critic,
            rng,
            env,
            world,
            cfg,
            episode: 0,
            low_buffer: Vec::new(),
            high_buffer: Vec::new(),
            pending_high: Vec::new(),
            updates: Vec::new(),
            low_transitions: 0,
            high_transitions: 0,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, TrainError> {
        ckpt.train.validate()?;
        let env = Env::new(ckpt.world.clone())?;
        let n = ckpt.world.num_auvs;
        let expected_actors = if ckpt.train.shared_actor { 1 } else { n };
        if ckpt.auv_actors.len() != expected_actors || ckpt.auv_opts.len() != expected_actors {
            return Err(TrainError::Checkpoint("actor count does not match shared_actor/num_auvs".into()));
        }
        if ckpt.central.bits() != n || ckpt.auv_critic.input_dim() != ckpt.world.critic_input_dim() {
            return Err(TrainError::Checkpoint("network shapes do not match num_auvs".into()));
        }
        Ok(Self {
            world: ckpt.world,
            cfg: ckpt.train,
            env,
            central: ckpt.central,
            central_opt: ckpt.central_opt,
            central_critic: ckpt.central_critic,
            central_critic_opt: ckpt.central_critic_opt,
            auv_actors: ckpt.auv_actors,
            auv_opts: ckpt.auv_opts,
            auv_critic: ckpt.auv_critic,
            auv_critic_opt: ckpt.auv_critic_opt,
            rng: ckpt.rng,
            episode: ckpt.episodes_done,
            low_buffer: ckpt.low_buffer,
            high_buffer: ckpt.high_buffer,
            pending_high: ckpt.pending_high,
            updates: ckpt.updates,
            low_transitions: ckpt.low_transitions,
            high_transitions: ckpt.high_transitions,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            episodes_done: self.episode,
            world: self.world.clone(),
            train: self.cfg.clone(),
            central: self.central.clone(),
            central_opt: self.central_opt.clone(),
            central_critic: self.central_critic.clone(),
            central_critic_opt: self.central_critic_opt.clone(),
            auv_actors: self.auv_actors.clone(),
            auv_opts: self.auv_opts.clone(),
            auv_critic: self.auv_critic.clone(),
            auv_critic_opt: self.auv_critic_opt.clone(),
            rng: self.rng.clone(),
            low_buffer: self.low_buffer.clone(),
            high_buffer: self.high_buffer.clone(),
            pending_high: self.pending_high.clone(),
            updates: self.updates.clone(),
            low_transitions: self.low_transitions,
            high_transitions: self.high_transitions,
        }
    }

    pub fn world(&self) -> &WorldConfig {
        &self.world
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn policies(&self) -> Policies {
        Policies {
            central: self.central.clone(),
            auv_actors: self.auv_actors.clone(),
        }
    }

    pub fn updates(&self) -> &[UpdateRecord] {
        &self.updates
    }

    /// Transitions recorded so far: (central level, AUV level).
    pub fn transitions(&self) -> (usize, usize) {
        (self.high_transitions, self.low_transitions)
    }

    /// Current buffer lengths: (central level incl. unfinished episode, AUV level).
    pub fn buffer_lens(&self) -> (usize, usize) {
        (self.high_buffer.len() + self.pending_high.len(), self.low_buffer.len())
    }

    fn actor_index(&self, auv: usize) -> usize {
        if self.cfg.shared_actor {
            0
        } else {
            auv
        }
    }

    /// Runs one episode of the two-level loop, updating whenever a buffer
    /// reaches its batch size.
    pub fn run_episode(&mut self) -> Result<EpisodeMetrics, TrainError> {
        let n = self.world.num_auvs;
        let mut state = self.env.reset(episode_seed(self.cfg.seed, self.episode));
        let mut high_rewards = Vec::new();
        let (mut low_sum, mut low_count) = (0.0, 0usize);
        let (mut coverage, mut delay, mut efficiency, mut completion) = (0.0, 0.0, 0.0, 0.0);
        let (mut comm, mut covert) = (0usize, 0usize);
        let slots = self.world.high_horizon;

        loop {
            let (selection, sel_lp) = self.central.sample(&state.features, &mut self.rng)?;
            let high_value = self.central_critic.predict(&state.features)?[0];
            let mut obs = self.env.begin_slot(&selection)?;
            let mut segments: Vec<AgentSegment> = obs
                .iter()
                .map(|o| AgentSegment {
                    actor_index: self.actor_index(o.auv),
                    ..AgentSegment::default()
                })
                .collect();
            loop {
                let mut actions = Vec::with_capacity(obs.len());
                for (k, o) in obs.iter().enumerate() {
                    let actor = &self.auv_actors[self.actor_index(o.auv)];
                    let sample = actor.sample(&o.features, &mut self.rng)?;
                    let c_in = critic_input(n, o, &obs);
                    let value = self.auv_critic.predict(&c_in)?[0];
                    let seg = &mut segments[k];
                    seg.actor_inputs.push(o.features.clone());
                    seg.critic_inputs.push(c_in);
                    seg.log_probs.push(sample.log_prob);
                    seg.values.push(value);
                    seg.dones.push(false);
                    actions.push(to_env_action(&sample.action));
                    seg.actions.push(sample.pre_squash);
                }
                let step = self.env.low_step(&actions)?;
                for (seg, r) in segments.iter_mut().zip(&step.rewards) {
                    seg.rewards.push(*r);
                    low_sum += r;
                    low_count += 1;
                }
                obs = step.observations;
                if step.done {
                    break;
                }
            }
            for (seg, o) in segments.iter_mut().zip(&obs) {
                seg.bootstrap_value = self.bootstrap_value(o, &obs)?;
                self.low_transitions += seg.rewards.len();
                self.low_buffer
                    .extend(segment_samples(seg, self.cfg.gamma, self.cfg.gae_lambda)?);
            }

            let outcome = self.env.end_slot()?;
            let info = &outcome.info;
            high_rewards.push(outcome.reward);
            coverage += info.coverage;
            delay += info.task_delay;
            efficiency += info.efficiency;
            completion += info.completion_ratio;
            comm += info.communicating_slices;
            covert += info.covert_slices;
            self.pending_high.push(PendingSlot {
                state: state.features.clone(),
                action: crate::neural::bits_to_f64(&selection),
                log_prob: sel_lp,
                reward: outcome.reward,
                value: high_value,
            });
            self.high_transitions += 1;
            state = outcome.state;

            if outcome.episode_done {
                self.flush_pending(None)?;
            }
            if self.low_buffer.len() >= self.cfg.batch_auv {
                self.update_auvs()?;
            }
            if self.high_buffer.len() + self.pending_high.len() >= self.cfg.batch_central {
                if !outcome.episode_done {
                    let v = self.central_critic.predict(&state.features)?[0];
                    self.flush_pending(Some(v))?;
                }
                self.update_central()?;
            }
            if outcome.episode_done {
                break;
            }
        }

        let episode = self.episode;
        self.episode += 1;
        let s = slots as f64;
        Ok(EpisodeMetrics {
            episode,
            high_reward_avg: high_rewards.iter().sum::<f64>() / high_rewards.len() as f64,
            low_reward_avg: if low_count > 0 { low_sum / low_count as f64 } else { 0.0 },
            coverage: coverage / s,
            task_delay: delay / s,
            efficiency: efficiency / s,
            covert_fraction: covert_fraction(covert, comm),
            completion_ratio: completion / s,
        })
    }

    fn bootstrap_value(&self, own: &LowLevelObs, team: &[LowLevelObs]) -> Result<f64, NeuralError> {
        Ok(self.auv_critic.predict(&critic_input(self.world.num_auvs, own, team))?[0])
    }

    /// Moves the unfinished episode's slot transitions into the central
    /// buffer. `None` marks the episode as over.
    fn flush_pending(&mut self, bootstrap: Option<f64>) -> Result<(), TrainError> {
        if self.pending_high.is_empty() {
            return Ok(());
        }
        let rewards: Vec<f64> = self.pending_high.iter().map(|p| p.reward).collect();
        let values: Vec<f64> = self.pending_high.iter().map(|p| p.value).collect();
        let mut dones = vec![false; rewards.len()];
        if bootstrap.is_none() {
            *dones.last_mut().expect("non-empty") = true;
        }
        let (adv, ret) = compute_gae(
            &rewards,
            &values,
            &dones,
            bootstrap.unwrap_or(0.0),
            self.cfg.gamma,
            self.cfg.gae_lambda,
        )?;
        for (k, p) in self.pending_high.drain(..).enumerate() {
            self.high_buffer.push(PpoSample {
                critic_input: p.state.clone(),
                actor_input: p.state,
                action: p.action,
                log_prob: p.log_prob,
                advantage: adv[k],
                ret: ret[k],
                actor_index: 0,
            });
        }
        Ok(())
    }

    fn update_auvs(&mut self) -> Result<(), TrainError> {
        let ppo = self.cfg.ppo(self.cfg.auv_minibatches);
        let stats = ppo_update(
            &mut self.auv_actors,
            &mut self.auv_opts,
            &mut self.auv_critic,
            &mut self.auv_critic_opt,
            &self.low_buffer,
            &ppo,
            &mut self.rng,
        )?;
        self.low_buffer.clear();
        self.updates.push(UpdateRecord {
            episode: self.episode,
            level: Level::Auv,
            stats,
            buffer_len_after: self.low_buffer.len(),
        });
        Ok(())
    }

    fn update_central(&mut self) -> Result<(), TrainError> {
        let ppo = self.cfg.ppo(self.cfg.central_minibatches);
        let stats = ppo_update(
            std::slice::from_mut(&mut self.central),
            std::slice::from_mut(&mut self.central_opt),
            &mut self.central_critic,
            &mut self.central_critic_opt,
            &self.high_buffer,
            &ppo,
            &mut self.rng,
        )?;
        self.high_buffer.clear();
        self.updates.push(UpdateRecord {
            episode: self.episode,
            level: Level::Central,
            stats,
            buffer_len_after: self.high_buffer.len() + self.pending_high.len(),
        });
        Ok(())
    }

    /// Runs episodes until `cfg.episodes` have been completed, calling
    /// `on_episode` after each one.
    pub fn train_with<F>(&mut self, mut on_episode: F) -> Result<(), TrainError>
    where
        F: FnMut(&Trainer, &EpisodeMetrics) -> Result<(), TrainError>,
    {
        while self.episode < self.cfg.episodes {
            let m = self.run_episode()?;
            on_episode(self, &m)?;
        }
        Ok(())
    }

    /// Draws a fresh 64-bit value from the trainer's stream (used to derive
    /// auxiliary seeds without disturbing determinism).
    pub fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn set_episodes(&mut self, episodes: usize) {
        self.cfg.episodes = episodes;
    }
}

pub(crate) fn covert_fraction(covert: usize, communicating: usize) -> f64 {
    if communicating == 0 {
        1.0
    } else {
        covert as f64 / communicating as f64
    }
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

pub struct TrainOutput {
    pub policies: Policies,
    pub history: Vec<EpisodeMetrics>,
    pub checkpoint: Checkpoint,
}

/// Trains from scratch for `cfg.episodes` episodes.
pub fn train(world: WorldConfig, cfg: TrainConfig) -> Result<TrainOutput, TrainError> {
    let mut trainer = Trainer::new(world, cfg)?;
    let mut history = Vec::new();
    trainer.train_with(|_, m| {
        history.push(m.clone());
        Ok(())
    })?;
    Ok(TrainOutput {
        policies: trainer.policies(),
        history,
        checkpoint: trainer.checkpoint(),
    })
}
