use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{covert_fraction, episode_seed, to_env_action, Policies};
use crate::envsim::{Env, TraceRecord, WorldConfig};
use crate::error::TrainError;

/// How the team is chosen each slot during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delegation {
    /// Greedy decision of the trained central policy.
    Learned,
    /// Each AUV independently with probability ½; all-zero draws are redrawn.
    Random,
    /// Every AUV, every slot.
    All,
}

impl Delegation {
    pub fn name(self) -> &'static str {
        match self {
            Delegation::Learned => "h-mappo",
            Delegation::Random => "random",
            Delegation::All => "flat-mappo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEpisode {
    pub episode: usize,
    pub seed: u64,
    /// Mean per-slot coverage / task delay.
    pub efficiency: f64,
    /// Total coverage over total task delay across the episode.
    pub cooperation_efficiency: f64,
    pub coverage: f64,
    pub task_delay: f64,
    pub covert_fraction: f64,
    pub completion_ratio: f64,
    /// Mean KL divergence over communicating slices.
    pub mean_kl: f64,
    pub communicating_slices: usize,
    pub covert_slices: usize,
    pub team_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub delegation: Delegation,
    pub episodes: usize,
    /// No episodes were run; every statistic is zero.
    pub empty: bool,
    pub efficiency: Stat,
    pub cooperation_efficiency: Stat,
    pub coverage: Stat,
    pub task_delay: Stat,
    pub covert_fraction: Stat,
    pub completion_ratio: Stat,
    pub mean_kl: Stat,
    /// Covert share of all communicating slices pooled over episodes.
    pub pooled_covert_fraction: f64,
    pub records: Vec<EvalEpisode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    pub delegation: Delegation,
    pub record_trace: bool,
}

const EVAL_SALT: u64 = 0x5EED_E7A1;

/// Greedy rollouts of the actors. Only actors are consulted; no critic or
/// global observation is involved.
pub fn evaluate(
    policies: &Policies,
    world: &WorldConfig,
    opts: &EvalOptions,
) -> Result<(EvalSummary, Vec<TraceRecord>), TrainError> {
    let mut env = Env::new(world.clone())?;
    env.set_tracing(opts.record_trace);
    let mut coin = ChaCha8Rng::seed_from_u64(opts.seed ^ EVAL_SALT);
    let mut records = Vec::with_capacity(opts.episodes);
    let mut trace = Vec::new();
    let n = world.num_auvs;

    for ep in 0..opts.episodes {
        let seed = episode_seed(opts.seed ^ EVAL_SALT, ep);
        let mut state = env.reset(seed);
        let (mut cov, mut delay, mut eff, mut completion, mut team) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let (mut comm, mut covert, mut kl_sum) = (0usize, 0usize, 0.0);
        let mut slots = 0usize;
        loop {
            let selection = match opts.delegation {
                Delegation::Learned => policies.central.greedy(&state.features)?,
                Delegation::All => vec![true; n],
                Delegation::Random => random_team(n, &mut coin),
            };
            let mut obs = env.begin_slot(&selection)?;
            loop {
                let mut actions = Vec::with_capacity(obs.len());
                for o in &obs {
                    let a = policies.auv_actor(o.auv).mean_action(&o.features)?;
                    actions.push(to_env_action(&a));
                }
                let step = env.low_step(&actions)?;
                obs = step.observations;
                if step.done {
                    break;
                }
            }
            let out = env.end_slot()?;
            let info = &out.info;
            cov += info.coverage;
            delay += info.task_delay;
            eff += info.efficiency;
            completion += info.completion_ratio;
            team += selection.iter().filter(|&&b| b).count() as f64;
            comm += info.communicating_slices;
            covert += info.covert_slices;
            kl_sum += info.mean_kl * info.communicating_slices as f64;
            slots += 1;
            state = out.state;
            if out.episode_done {
                break;
            }
        }
        let s = slots as f64;
        records.push(EvalEpisode {
            episode: ep,
            seed,
            efficiency: eff / s,
            cooperation_efficiency: cov / delay,
            coverage: cov / s,
            task_delay: delay / s,
            covert_fraction: covert_fraction(covert, comm),
            completion_ratio: completion / s,
            mean_kl: if comm > 0 { kl_sum / comm as f64 } else { 0.0 },
            communicating_slices: comm,
            covert_slices: covert,
            team_size: team / s,
        });
        if opts.record_trace {
            trace.extend(env.take_trace());
        }
    }
    Ok((summarize(opts.delegation, records), trace))
}

fn random_team<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<bool> {
    loop {
        let team: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if team.iter().any(|&b| b) {
            return team;
        }
    }
}

fn summarize(delegation: Delegation, records: Vec<EvalEpisode>) -> EvalSummary {
    let col = |f: fn(&EvalEpisode) -> f64| Stat::of(&records.iter().map(f).collect::<Vec<_>>());
    let comm: usize = records.iter().map(|r| r.communicating_slices).sum();
    let covert: usize = records.iter().map(|r| r.covert_slices).sum();
    EvalSummary {
        delegation,
        episodes: records.len(),
        empty: records.is_empty(),
        efficiency: col(|r| r.efficiency),
        cooperation_efficiency: col(|r| r.cooperation_efficiency),
        coverage: col(|r| r.coverage),
        task_delay: col(|r| r.task_delay),
        covert_fraction: col(|r| r.covert_fraction),
        completion_ratio: col(|r| r.completion_ratio),
        mean_kl: col(|r| r.mean_kl),
        pooled_covert_fraction: if records.is_empty() {
            0.0
        } else {
            covert_fraction(covert, comm)
        },
        records,
    }
}

pub fn write_eval_csv<W: std::io::Write>(out: W, records: &[EvalEpisode]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
