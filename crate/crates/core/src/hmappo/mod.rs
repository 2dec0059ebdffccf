//! Dual-timescale hierarchical multi-agent PPO.
//!
//! The central AUV's team-selection policy is trained with PPO on slot-level
//! transitions; the AUVs' power/velocity actors are trained with multi-agent
//! PPO against one centralized critic that sees every active AUV's
//! observation. Execution only uses the actors.

mod eval;
mod gae;
mod ppo;
mod train;

pub use eval::{evaluate, write_eval_csv, Delegation, EvalEpisode, EvalOptions, EvalSummary, Stat};
pub use gae::compute_gae;
pub use ppo::{clipped_surrogate, ppo_update, PpoConfig, PpoSample, UpdateStats};
pub use train::{
    episode_seed, mappo_update, segment_samples, train, AgentSegment, Checkpoint, EpisodeMetrics, Level, Policies,
    TrainConfig, TrainOutput, Trainer, UpdateRecord, CHECKPOINT_FORMAT,
};
