//! Dual-timescale mission environment.
//!
//! Each episode is `high_horizon` slots. At the start of a slot the central
//! AUV picks a team (`begin_slot`); the team then acts once per slice
//! (`low_step`) until every member has reached its sub-target, scanned and
//! uploaded, or the slice horizon runs out. `end_slot` scores the slot and
//! returns the next high-level state.

mod config;
mod trace;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics;
use crate::error::{ConfigError, EnvError};
use crate::mission::{self, AuvCapability, PhaseDelays, SubTargetPlan, TaskCommand};
use crate::ocean::{self, Vec3};

pub use config::{HighRewardWeights, LowRewardWeights, WorldConfig};
pub use trace::{write_trace_csv, AuvTrace, TraceRecord};

/// Width of one normalized AUV observation.
pub const OBS_DIM: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuvState {
    pub position: Vec3,
    /// Commanded water-relative velocity of the last slice.
    pub velocity: Vec3,
    pub energy: f64,
    pub capability: AuvCapability,
    pub radius: f64,
    pub arrived: bool,
    pub selected: bool,
}

/// Global state seen by the central AUV: positions and remaining energies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighLevelState {
    pub positions: Vec<Vec3>,
    pub energies: Vec<f64>,
    /// Normalized features, 4 per AUV, each in [-1, 1] while energy is non-negative.
    pub features: Vec<f64>,
}

/// Local observation of one selected AUV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowLevelObs {
    pub auv: usize,
    pub d_central: f64,
    pub d_sub: f64,
    pub to_sub: Vec3,
    pub position: Vec3,
    pub velocity: Vec3,
    pub energy: f64,
    pub current: Vec3,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowLevelAction {
    /// Transmit power (W), clamped to [P_min, P_max].
    pub power: f64,
    /// Commanded water-relative velocity (m/s), rescaled to V_max if longer.
    pub velocity: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Transit,
    Scanning { ends_at: f64 },
    Uploading { remaining_bits: f64 },
    Finished,
}

#[derive(Debug, Clone)]
struct AgentSlot {
    auv: usize,
    sub_target: Vec3,
    radius: f64,
    phase: Phase,
    arrival_time: Option<f64>,
    dispatch_delay: f64,
    data_bits: f64,
    tx_time: f64,
    upload_delay: Option<f64>,
    last_power: f64,
    prev_distance: f64,
    reward_sum: f64,
}

#[derive(Debug, Clone)]
struct SlotState {
    selection: Vec<bool>,
    agents: Vec<AgentSlot>,
    plan: SubTargetPlan,
    slice: usize,
    done: bool,
    communicating_slices: usize,
    covert_slices: usize,
    kl_sum: f64,
    reward_total: f64,
    reward_count: usize,
}

/// Per-slice diagnostics returned by `low_step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceInfo {
    pub slot: usize,
    pub slice: usize,
    /// Eavesdropper SNR of the whole team.
    pub gamma_e: f64,
    pub kl: f64,
    pub covert: bool,
    /// At least one selected AUV transmitted this slice.
    pub communicating: bool,
    /// Radiated power per active AUV this slice (0 once an AUV is finished).
    pub powers: Vec<f64>,
    pub positions: Vec<Vec3>,
    pub arrived: Vec<bool>,
    pub finished: Vec<bool>,
    pub energy_violation: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowStep {
    pub observations: Vec<LowLevelObs>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: SliceInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotInfo {
    pub slot: usize,
    pub selected: Vec<bool>,
    pub coverage: f64,
    pub task_delay: f64,
    pub efficiency: f64,
    /// Every selected AUV arrived and finished its upload.
    pub completed: bool,
    pub completion_ratio: f64,
    pub phases: Vec<PhaseDelays>,
    pub slices: usize,
    pub communicating_slices: usize,
    pub covert_slices: usize,
    pub mean_kl: f64,
    /// Mean per-slice reward over the selected AUVs.
    pub avg_low_reward: f64,
    /// Cumulative slot reward per selected AUV.
    pub agent_returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotOutcome {
    pub state: HighLevelState,
    pub reward: f64,
    pub info: SlotInfo,
    pub episode_done: bool,
}

/// Energy accounting of one AUV over the current episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub initial: f64,
    pub consumed: f64,
    pub current: f64,
}

pub struct Env {
    cfg: WorldConfig,
    rng: ChaCha8Rng,
    auvs: Vec<AuvState>,
    ledger: Vec<EnergyLedger>,
    task: Option<TaskCommand>,
    slot_index: usize,
    slot: Option<SlotState>,
    tracing: bool,
    trace: Vec<TraceRecord>,
}

impl Env {
    pub fn new(cfg: WorldConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(0),
            auvs: Vec::new(),
            ledger: Vec::new(),
            task: None,
            slot_index: 0,
            slot: None,
            tracing: false,
            trace: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn auvs(&self) -> &[AuvState] {
        &self.auvs
    }

    pub fn task(&self) -> Option<&TaskCommand> {
        self.task.as_ref()
    }

    pub fn energy_ledger(&self) -> &[EnergyLedger] {
        &self.ledger
    }

    /// Indices of the AUVs acting in the running slot.
    pub fn active_auvs(&self) -> Vec<usize> {
        self.slot
            .as_ref()
            .map(|s| s.agents.iter().map(|a| a.auv).collect())
            .unwrap_or_default()
    }

    pub fn sub_targets(&self) -> Option<&SubTargetPlan> {
        self.slot.as_ref().map(|s| &s.plan)
    }

    pub fn slot_index(&self) -> usize {
        self.slot_index
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    pub fn reset(&mut self, seed: u64) -> HighLevelState {
        let cfg = &self.cfg;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut self.rng;
        let mut auvs = Vec::with_capacity(cfg.num_auvs);
        for _ in 0..cfg.num_auvs {
            let position = Vec3::new(
                rng.random_range(0.0..=cfg.world_extent),
                rng.random_range(0.0..=cfg.world_extent),
                rng.random_range(-cfg.world_depth..=0.0),
            );
            let energy = rng.random_range(cfg.energy_min..=cfg.energy_max);
            let capability = AuvCapability {
                compute: rng.random_range(cfg.compute_min..=cfg.compute_max),
                base_radius: cfg.base_radius,
                radius_gain: cfg.radius_gain,
                compute_ref: cfg.compute_ref,
            };
            auvs.push(AuvState {
                position,
                velocity: Vec3::zeros(),
                energy,
                radius: mission::exploration_radius(&capability),
                capability,
                arrived: false,
                selected: false,
            });
        }
        let half = 0.5 * cfg.task_side;
        let task = TaskCommand {
            center: Vec3::new(
                rng.random_range(half..=cfg.world_extent - half),
                rng.random_range(half..=cfg.world_extent - half),
                -cfg.task_depth,
            ),
            length: cfg.task_side,
            width: cfg.task_side,
            command_bits: cfg.command_bits,
        };
        self.ledger = auvs
            .iter()
            .map(|a| EnergyLedger {
                initial: a.energy,
                consumed: 0.0,
                current: a.energy,
            })
            .collect();
        self.auvs = auvs;
        self.task = Some(task);
        self.slot_index = 0;
        self.slot = None;
        self.trace.clear();
        self.high_state()
    }

    pub fn high_state(&self) -> HighLevelState {
        let cfg = &self.cfg;
        let mut features = Vec::with_capacity(4 * self.auvs.len());
        for a in &self.auvs {
            features.extend(normalized_position(&a.position, cfg));
            features.push(a.energy / cfg.energy_max);
        }
        if cfg.state_includes_task {
            let center = self.task.as_ref().map_or(Vec3::zeros(), |t| t.center);
            features.extend(normalized_position(&center, cfg));
        }
        HighLevelState {
            positions: self.auvs.iter().map(|a| a.position).collect(),
            energies: self.auvs.iter().map(|a| a.energy).collect(),
            features,
        }
    }

    pub fn begin_slot(&mut self, selection: &[bool]) -> Result<Vec<LowLevelObs>, EnvError> {
        let task = self.task.clone().ok_or(EnvError::NotReset)?;
        if self.slot.is_some() {
            return Err(EnvError::SlotInProgress);
        }
        if selection.len() != self.cfg.num_auvs {
            return Err(crate::error::DomainError::LengthMismatch {
                what: "selection",
                expected: self.cfg.num_auvs,
                got: selection.len(),
            }
            .into());
        }
        let active: Vec<usize> = (0..selection.len()).filter(|&i| selection[i]).collect();
        if active.is_empty() {
            return Err(crate::error::DomainError::EmptySelection.into());
        }
        let radii: Vec<f64> = active.iter().map(|&i| self.auvs[i].radius).collect();
        let plan_seed = self.rng.next_u64();
        let plan = mission::plan_subtargets(&task, &radii, plan_seed, &self.cfg.planner)?;

        let cfg = &self.cfg;
        let mut agents = Vec::with_capacity(active.len());
        for (k, &i) in active.iter().enumerate() {
            let auv = &mut self.auvs[i];
            auv.selected = true;
            auv.arrived = false;
            let d_nc = distance_floor(&auv.position, &cfg.central_position);
            let rate = acoustics::link_rate(cfg.central_power, d_nc, active.len(), &cfg.acoustic)?;
            let sub_target = plan.centers[k];
            agents.push(AgentSlot {
                auv: i,
                sub_target,
                radius: radii[k],
                phase: Phase::Transit,
                arrival_time: None,
                dispatch_delay: mission::dispatch_delay(d_nc, task.command_bits, rate, &cfg.energy),
                data_bits: mission::collected_data(radii[k], &cfg.energy),
                tx_time: 0.0,
                upload_delay: None,
                last_power: cfg.power_min,
                prev_distance: (sub_target - auv.position).norm(),
                reward_sum: 0.0,
            });
        }
        let mut slot = SlotState {
            selection: selection.to_vec(),
            agents,
            plan,
            slice: 0,
            done: false,
            communicating_slices: 0,
            covert_slices: 0,
            kl_sum: 0.0,
            reward_total: 0.0,
            reward_count: 0,
        };
        // An AUV may already sit inside its disc.
        for agent in &mut slot.agents {
            if agent.prev_distance <= agent.radius {
                agent.arrival_time = Some(0.0);
                agent.phase = Phase::Scanning {
                    ends_at: mission::scan_delay(&cfg.energy),
                };
                self.auvs[agent.auv].arrived = true;
            }
        }
        let obs = slot.agents.iter().map(|a| self.observe(a)).collect();
        self.slot = Some(slot);
        Ok(obs)
    }

    fn observe(&self, agent: &AgentSlot) -> LowLevelObs {
        let cfg = &self.cfg;
        let auv = &self.auvs[agent.auv];
        let current = ocean::current_at(&auv.position, &cfg.current);
        let to_sub = agent.sub_target - auv.position;
        let d_central = (cfg.central_position - auv.position).norm();
        let diag = cfg.bounds().diagonal();
        let mut features = Vec::with_capacity(OBS_DIM);
        features.push(d_central / diag);
        features.push(to_sub.norm() / diag);
        features.extend((to_sub / diag).iter());
        features.extend(normalized_position(&auv.position, cfg));
        features.extend((auv.velocity / cfg.v_max).iter());
        features.push(auv.energy / cfg.energy_max);
        features.extend((current / cfg.v_max).iter());
        debug_assert_eq!(features.len(), OBS_DIM);
        LowLevelObs {
            auv: agent.auv,
            d_central,
            d_sub: to_sub.norm(),
            to_sub,
            position: auv.position,
            velocity: auv.velocity,
            energy: auv.energy,
            current,
            features,
        }
    }

    pub fn low_step(&mut self, actions: &[LowLevelAction]) -> Result<LowStep, EnvError> {
        let mut slot = self.slot.take().ok_or(EnvError::NoActiveSlot)?;
        let result = self.low_step_inner(&mut slot, actions);
        self.slot = Some(slot);
        result
    }

    fn low_step_inner(&mut self, slot: &mut SlotState, actions: &[LowLevelAction]) -> Result<LowStep, EnvError> {
        if slot.done {
            return Err(EnvError::SlotFinished);
        }
        if actions.len() != slot.agents.len() {
            return Err(EnvError::ActionCount {
                expected: slot.agents.len(),
                got: actions.len(),
            });
        }
        let cfg = &self.cfg;
        let dt = cfg.slice_seconds;
        let bounds = cfg.bounds();
        slot.slice += 1;
        let now = slot.slice as f64 * dt;
        let n_active = slot.agents.len();

        // Kinematics and mobility energy.
        let mut powers = Vec::with_capacity(n_active);
        let mut spent = vec![0.0; n_active];
        for (k, (agent, action)) in slot.agents.iter_mut().zip(actions).enumerate() {
            let auv = &mut self.auvs[agent.auv];
            let power = action.power.clamp(cfg.power_min, cfg.power_max);
            let current = ocean::current_at(&auv.position, &cfg.current);
            let thrust = match agent.phase {
                Phase::Transit => clamp_norm(action.velocity, cfg.v_max),
                // Station keeping: cancel the local current.
                _ => clamp_norm(-current, cfg.v_max),
            };
            let ground = thrust + current;
            let v_rel = ocean::relative_velocity(&ground, &auv.position, &cfg.current);
            let mobility = mission::mobility_energy(&ground, &v_rel, dt, &cfg.energy);
            auv.position = ocean::integrate_motion(&auv.position, &ground, dt, &bounds);
            auv.velocity = thrust;
            spent[k] += mobility.total();
            agent.last_power = power;
            powers.push(if agent.phase == Phase::Finished { 0.0 } else { power });
        }

        // Team covertness at the eavesdropper.
        let transmitting: Vec<bool> = powers.iter().map(|&p| p > 0.0).collect();
        let eav_d: Vec<f64> = slot
            .agents
            .iter()
            .map(|a| distance_floor(&self.auvs[a.auv].position, &cfg.eavesdropper_position))
            .collect();
        let gamma_e = acoustics::eavesdropper_snr(&transmitting, &powers, &eav_d, &cfg.acoustic)?;
        let kl = acoustics::kl_divergence(gamma_e)?;
        let covert = acoustics::covertness_satisfied(kl, &cfg.covertness);
        let communicating = transmitting.iter().any(|&t| t);
        if communicating {
            slot.communicating_slices += 1;
            slot.kl_sum += kl;
            if covert {
                slot.covert_slices += 1;
            }
        }

        // Task phases, energy and rewards.
        let w = cfg.low_reward;
        let mut rewards = Vec::with_capacity(n_active);
        let mut arrived_flags = Vec::with_capacity(n_active);
        let mut finished_flags = Vec::with_capacity(n_active);
        let mut violation = Vec::with_capacity(n_active);
        for (k, agent) in slot.agents.iter_mut().enumerate() {
            let auv = &mut self.auvs[agent.auv];
            let distance = (agent.sub_target - auv.position).norm();
            let mut arrival_bonus = 0.0;
            match agent.phase {
                Phase::Transit => {
                    if distance <= agent.radius {
                        agent.arrival_time = Some(now);
                        agent.phase = Phase::Scanning {
                            ends_at: now + mission::scan_delay(&cfg.energy),
                        };
                        auv.arrived = true;
                        arrival_bonus = w.arrival;
                    }
                }
                Phase::Scanning { ends_at } => {
                    if now >= ends_at - 1e-9 {
                        spent[k] += mission::exploration_energy(agent.radius, &cfg.energy);
                        agent.phase = Phase::Uploading {
                            remaining_bits: agent.data_bits,
                        };
                    }
                }
                Phase::Uploading { remaining_bits } => {
                    let d_nc = distance_floor(&auv.position, &cfg.central_position);
                    let rate = acoustics::link_rate(powers[k], d_nc, n_active, &cfg.acoustic)?;
                    let sent = remaining_bits.min(rate * dt);
                    spent[k] += mission::upload_energy(powers[k], sent, rate, &cfg.energy);
                    agent.tx_time += if rate > 0.0 { sent / rate } else { dt };
                    let left = remaining_bits - sent;
                    if left <= 0.0 {
                        agent.phase = Phase::Finished;
                        agent.upload_delay = Some(agent.tx_time + d_nc / cfg.energy.sound_speed);
                    } else {
                        agent.phase = Phase::Uploading { remaining_bits: left };
                    }
                }
                Phase::Finished => {}
            }
            auv.energy = mission::remaining_energy(auv.energy, spent[k], 0.0, 0.0);
            let ledger = &mut self.ledger[agent.auv];
            ledger.consumed += spent[k];
            ledger.current = auv.energy;

            let progress = agent.prev_distance - distance;
            agent.prev_distance = distance;
            let r = low_reward(&w, covert, progress, arrival_bonus > 0.0, auv.energy);
            agent.reward_sum += r;
            slot.reward_total += r;
            slot.reward_count += 1;
            rewards.push(r);
            arrived_flags.push(auv.arrived);
            finished_flags.push(agent.phase == Phase::Finished);
            violation.push(auv.energy < 0.0);
        }

        let all_finished = slot.agents.iter().all(|a| a.phase == Phase::Finished);
        slot.done = all_finished || slot.slice >= cfg.low_horizon;

        if self.tracing {
            let mut per_auv: Vec<AuvTrace> = self
                .auvs
                .iter()
                .map(|a| AuvTrace {
                    position: a.position,
                    power: 0.0,
                    velocity: if a.selected { a.velocity } else { Vec3::zeros() },
                    energy: a.energy,
                })
                .collect();
            for (agent, &p) in slot.agents.iter().zip(&powers) {
                per_auv[agent.auv].power = p;
            }
            self.trace.push(TraceRecord {
                slot: self.slot_index,
                slice: slot.slice,
                gamma_e,
                kl,
                covert,
                auvs: per_auv,
            });
        }

        let observations = slot.agents.iter().map(|a| self.observe(a)).collect();
        let positions = slot.agents.iter().map(|a| self.auvs[a.auv].position).collect();
        Ok(LowStep {
            observations,
            rewards,
            done: slot.done,
            info: SliceInfo {
                slot: self.slot_index,
                slice: slot.slice,
                gamma_e,
                kl,
                covert,
                communicating,
                powers,
                positions,
                arrived: arrived_flags,
                finished: finished_flags,
                energy_violation: violation,
            },
        })
    }

    pub fn end_slot(&mut self) -> Result<SlotOutcome, EnvError> {
        let slot = self.slot.as_ref().ok_or(EnvError::NoActiveSlot)?;
        if !slot.done {
            return Err(EnvError::SlotNotFinished);
        }
        let slot = self.slot.take().expect("checked above");
        let cfg = &self.cfg;
        let task = self.task.as_ref().ok_or(EnvError::NotReset)?;
        let horizon_time = cfg.low_horizon as f64 * cfg.slice_seconds;
        let scan = mission::scan_delay(&cfg.energy);
        let n_active = slot.agents.len();

        let mut phases = Vec::with_capacity(n_active);
        for agent in &slot.agents {
            let auv = &self.auvs[agent.auv];
            let upload = match agent.upload_delay {
                Some(t) => t,
                None => {
                    let d_nc = distance_floor(&auv.position, &cfg.central_position);
                    let rate = acoustics::link_rate(agent.last_power, d_nc, n_active, &cfg.acoustic)?;
                    mission::upload_delay(agent.data_bits, rate, d_nc, &cfg.energy)
                }
            };
            phases.push(PhaseDelays {
                dispatch: agent.dispatch_delay,
                movement: agent.arrival_time.unwrap_or(horizon_time),
                scan,
                upload,
                completed: agent.phase == Phase::Finished,
            });
        }
        let task_delay = mission::task_delay(&phases)?;
        let radii: Vec<f64> = self.auvs.iter().map(|a| a.radius).collect();
        let coverage = mission::coverage(&slot.selection, &radii, task);
        let efficiency = mission::cooperation_efficiency(coverage, task_delay)?;
        let completed_count = phases.iter().filter(|p| p.completed).count();
        let avg_low_reward = if slot.reward_count > 0 {
            slot.reward_total / slot.reward_count as f64
        } else {
            0.0
        };
        let wh = cfg.high_reward;
        let reward = wh.coverage * coverage + wh.delay * task_delay + wh.low_level * avg_low_reward;
        let info = SlotInfo {
            slot: self.slot_index,
            selected: slot.selection.clone(),
            coverage,
            task_delay,
            efficiency,
            completed: completed_count == n_active,
            completion_ratio: completed_count as f64 / n_active as f64,
            phases,
            slices: slot.slice,
            communicating_slices: slot.communicating_slices,
            covert_slices: slot.covert_slices,
            mean_kl: if slot.communicating_slices > 0 {
                slot.kl_sum / slot.communicating_slices as f64
            } else {
                0.0
            },
            avg_low_reward,
            agent_returns: slot.agents.iter().map(|a| a.reward_sum).collect(),
        };
        for auv in &mut self.auvs {
            auv.selected = false;
            auv.arrived = false;
            auv.velocity = Vec3::zeros();
        }
        self.slot_index += 1;
        Ok(SlotOutcome {
            state: self.high_state(),
            reward,
            info,
            episode_done: self.slot_index >= self.cfg.high_horizon,
        })
    }

    /// Centralized-critic input for one active AUV: its own observation
    /// followed by every AUV's observation slot (zeros for AUVs not acting).
    pub fn critic_input(&self, own: &LowLevelObs, team: &[LowLevelObs]) -> Vec<f64> {
        critic_input(self.cfg.num_auvs, own, team)
    }
}

pub fn critic_input(num_auvs: usize, own: &LowLevelObs, team: &[LowLevelObs]) -> Vec<f64> {
    let mut x = vec![0.0; OBS_DIM * (num_auvs + 1)];
    x[..OBS_DIM].copy_from_slice(&own.features);
    for o in team {
        let start = OBS_DIM * (o.auv + 1);
        x[start..start + OBS_DIM].copy_from_slice(&o.features);
    }
    x
}

pub fn low_reward(w: &LowRewardWeights, covert: bool, progress: f64, first_arrival: bool, energy: f64) -> f64 {
    let mut r = w.progress * progress;
    if covert {
        r += w.covert;
    }
    if first_arrival {
        r += w.arrival;
    }
    r - w.energy * (-energy).max(0.0)
}

fn normalized_position(p: &Vec3, cfg: &WorldConfig) -> [f64; 3] {
    [
        2.0 * p.x / cfg.world_extent - 1.0,
        2.0 * p.y / cfg.world_extent - 1.0,
        2.0 * p.z / cfg.world_depth + 1.0,
    ]
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Distances feed path loss, which is undefined at zero; co-located nodes are
/// treated as 1 m apart.
fn distance_floor(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm().max(1.0)
}
