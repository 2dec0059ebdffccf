use serde::{Deserialize, Serialize};

use crate::acoustics::{AcousticParams, CovertnessParams};
use crate::error::ConfigError;
use crate::mission::{EnergyParams, PlannerParams};
use crate::ocean::{Vec3, VortexField, WorldBounds};

/// Weights of the slot-level reward Δ₁·ς + Δ₂·T_task + Δ₃·avg(R).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighRewardWeights {
    pub coverage: f64,
    /// Per second of task delay; negative penalizes slow slots.
    pub delay: f64,
    pub low_level: f64,
}

impl Default for HighRewardWeights {
    fn default() -> Self {
        Self {
            coverage: 25.0,
            delay: -0.01,
            low_level: 1.0,
        }
    }
}

/// Weights of the per-slice AUV reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowRewardWeights {
    pub covert: f64,
    /// Per meter of progress towards the sub-target.
    pub progress: f64,
    pub arrival: f64,
    /// Per joule of energy deficit.
    pub energy: f64,
}

impl Default for LowRewardWeights {
    fn default() -> Self {
        Self {
            covert: 1.0,
            progress: 0.1,
            arrival: 10.0,
            energy: 0.01,
        }
    }
}

/// Every physical, task and covertness parameter of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub num_auvs: usize,
    /// Horizontal side of the square domain (m).
    pub world_extent: f64,
    /// Depth of the domain (m).
    pub world_depth: f64,
    pub central_position: Vec3,
    pub eavesdropper_position: Vec3,
    /// Power the central AUV uses to dispatch commands (W).
    pub central_power: f64,
    pub power_min: f64,
    pub power_max: f64,
    pub v_max: f64,
    /// Physical length of one time slice Δτ (s).
    pub slice_seconds: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    /// Slots per episode.
    pub high_horizon: usize,
    /// Slices per slot.
    pub low_horizon: usize,
    /// Side of the square task rectangle (m).
    pub task_side: f64,
    /// Depth of the task rectangle below the surface (m).
    pub task_depth: f64,
    /// Append the task center to the central AUV's state.
    pub state_includes_task: bool,
    pub command_bits: f64,
    pub compute_min: f64,
    pub compute_max: f64,
    pub base_radius: f64,
    pub radius_gain: f64,
    pub compute_ref: f64,
    pub acoustic: AcousticParams,
    pub covertness: CovertnessParams,
    pub energy: EnergyParams,
    pub current: VortexField,
    pub planner: PlannerParams,
    pub high_reward: HighRewardWeights,
    pub low_reward: LowRewardWeights,
    // Table entries that no formula consumes; kept so snapshots list them.
    pub reference_length: f64,
    pub uplink_carrier_ghz: f64,
    pub mission_compute: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_auvs: 5,
            world_extent: 200.0,
            world_depth: 200.0,
            central_position: Vec3::new(0.0, 0.0, -20.0),
            eavesdropper_position: Vec3::new(70.0, 70.0, -10.0),
            central_power: 1.0,
            power_min: 0.01,
            power_max: 2.0,
            v_max: 5.0,
            slice_seconds: 2.0,
            energy_min: 1.0e7,
            energy_max: 2.0e7,
            high_horizon: 10,
            low_horizon: 100,
            task_side: 100.0,
            task_depth: 100.0,
            state_includes_task: true,
            command_bits: 1e5,
            compute_min: 5.0,
            compute_max: 20.0,
            base_radius: 5.0,
            radius_gain: 2.0,
            compute_ref: 10.0,
            acoustic: AcousticParams::default(),
            covertness: CovertnessParams::default(),
            energy: EnergyParams::default(),
            current: VortexField::default(),
            planner: PlannerParams::default(),
            high_reward: HighRewardWeights::default(),
            low_reward: LowRewardWeights::default(),
            reference_length: 0.5,
            uplink_carrier_ghz: 50.0,
            mission_compute: 5.0,
        }
    }
}

impl WorldConfig {
    pub fn bounds(&self) -> WorldBounds {
        WorldBounds {
            extent: self.world_extent,
            depth: self.world_depth,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invariant(msg));
        if self.num_auvs == 0 {
            return bad("num_auvs must be >= 1".into());
        }
        if !(self.world_extent > 0.0 && self.world_depth > 0.0) {
            return bad("world_extent and world_depth must be > 0".into());
        }
        if !(self.power_min >= 0.0 && self.power_min < self.power_max) {
            return bad(format!(
                "power_min < power_max required (got {} and {})",
                self.power_min, self.power_max
            ));
        }
        if !(self.central_power > 0.0) {
            return bad("central_power must be > 0".into());
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be > 0".into());
        }
        if !(self.slice_seconds > 0.0) {
            return bad("slice_seconds must be > 0".into());
        }
        if !(self.energy_min > 0.0 && self.energy_min <= self.energy_max) {
            return bad("0 < energy_min <= energy_max required".into());
        }
        if self.high_horizon == 0 || self.low_horizon == 0 {
            return bad("horizons must be >= 1".into());
        }
        if !(self.task_side > 0.0 && self.task_side <= self.world_extent) {
            return bad("task_side must be in (0, world_extent]".into());
        }
        if !(0.0..=self.world_depth).contains(&self.task_depth) {
            return bad("task_depth must be in [0, world_depth]".into());
        }
        if !(self.command_bits >= 0.0) {
            return bad("command_bits must be >= 0".into());
        }
        if !(self.compute_min > 0.0 && self.compute_min <= self.compute_max) {
            return bad("0 < compute_min <= compute_max required".into());
        }
        if !(self.base_radius > 0.0 && self.radius_gain >= 0.0 && self.compute_ref > 0.0) {
            return bad("base_radius > 0, radius_gain >= 0, compute_ref > 0 required".into());
        }
        let bounds = self.bounds();
        if !bounds.contains(&self.central_position) || !bounds.contains(&self.eavesdropper_position) {
            return bad("central and eavesdropper positions must lie inside the world".into());
        }
        if !(0.0..=1.0).contains(&self.planner.overlap_tol) {
            return bad("planner.overlap_tol must be in [0, 1]".into());
        }
        self.acoustic.validate().map_err(|e| ConfigError::Invariant(e.to_string()))?;
        self.covertness.validate().map_err(|e| ConfigError::Invariant(e.to_string()))?;
        self.energy.validate().map_err(|e| ConfigError::Invariant(e.to_string()))?;
        self.current.validate().map_err(|e| ConfigError::Invariant(e.to_string()))?;
        Ok(())
    }

    /// Width of one AUV's observation vector.
    pub const fn obs_dim() -> usize {
        super::OBS_DIM
    }

    pub fn state_dim(&self) -> usize {
        4 * self.num_auvs + if self.state_includes_task { 3 } else { 0 }
    }

    /// Width of the centralized critic input: own observation followed by the
    /// zero-padded concatenation of every AUV's observation.
    pub fn critic_input_dim(&self) -> usize {
        super::OBS_DIM * (self.num_auvs + 1)
    }
}
