//! Task geometry, phase delays, energy accounting and the cooperation
//! efficiency objective.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::ocean::Vec3;

/// Rectangular exploration area at a fixed depth, issued once per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCommand {
    pub center: Vec3,
    pub length: f64,
    pub width: f64,
    pub command_bits: f64,
}

impl TaskCommand {
    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (p.x - self.center.x).abs() <= 0.5 * self.length + 1e-9
            && (p.y - self.center.y).abs() <= 0.5 * self.width + 1e-9
            && (p.z - self.center.z).abs() <= 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuvCapability {
    pub compute: f64,
    pub base_radius: f64,
    pub radius_gain: f64,
    pub compute_ref: f64,
}

pub fn exploration_radius(cap: &AuvCapability) -> f64 {
    cap.base_radius + cap.radius_gain * (cap.compute / cap.compute_ref).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    /// Largest admissible pairwise overlap, as a fraction of the smaller disc's area.
    pub overlap_tol: f64,
    /// Rejected candidates per AUV before the minimum-overlap fallback.
    pub max_tries: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            overlap_tol: 0.05,
            max_tries: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTargetPlan {
    pub centers: Vec<Vec3>,
    pub radii: Vec<f64>,
    /// True when at least one disc had to be placed by the fallback rule.
    pub fallback_used: bool,
    /// Largest pairwise overlap / (π·min(r_i, r_j)²) in the final plan.
    pub max_overlap_fraction: f64,
}

/// Intersection area of two discs with radii `r1`, `r2` and center distance `d`.
pub fn disc_overlap_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let small = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return PI * small * small;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()
}

fn overlap_fraction(c1: &Vec3, r1: f64, c2: &Vec3, r2: f64) -> f64 {
    let d = (c1 - c2).norm();
    let small = r1.min(r2);
    disc_overlap_area(r1, r2, d) / (PI * small * small)
}

/// Greedy randomized disc placement: each AUV in turn takes the first uniform
/// candidate that does not overlap any accepted disc beyond the tolerance.
pub fn plan_subtargets(
    task: &TaskCommand,
    radii: &[f64],
    seed: u64,
    params: &PlannerParams,
) -> Result<SubTargetPlan, DomainError> {
    if radii.is_empty() {
        return Err(DomainError::EmptySelection);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec3> = Vec::with_capacity(radii.len());
    let mut fallback_used = false;
    let half_l = 0.5 * task.length;
    let half_w = 0.5 * task.width;

    for (i, &r) in radii.iter().enumerate() {
        let mut best: Option<(f64, Vec3)> = None;
        let mut accepted = None;
        for _ in 0..params.max_tries.max(1) {
            let candidate = Vec3::new(
                task.center.x + rng.random_range(-half_l..=half_l),
                task.center.y + rng.random_range(-half_w..=half_w),
                task.center.z,
            );
            let mut total = 0.0;
            let mut ok = true;
            for (j, c) in centers.iter().enumerate() {
                let frac = overlap_fraction(&candidate, r, c, radii[j]);
                total += frac;
                if frac > params.overlap_tol {
                    ok = false;
                }
            }
            if ok {
                accepted = Some(candidate);
                break;
            }
            if best.as_ref().map_or(true, |(b, _)| total < *b) {
                best = Some((total, candidate));
            }
        }
        let center = match accepted {
            Some(c) => c,
            None => {
                fallback_used = true;
                best.expect("at least one candidate sampled").1
            }
        };
        debug_assert!(i == centers.len());
        centers.push(center);
    }

    let mut max_overlap_fraction: f64 = 0.0;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            max_overlap_fraction =
                max_overlap_fraction.max(overlap_fraction(&centers[i], radii[i], &centers[j], radii[j]));
        }
    }
    Ok(SubTargetPlan {
        centers,
        radii: radii.to_vec(),
        fallback_used,
        max_overlap_fraction,
    })
}

/// Unclamped coverage Σ G_n π r_n² / (l·w).
pub fn coverage_raw(selection: &[bool], radii: &[f64], task: &TaskCommand) -> f64 {
    selection
        .iter()
        .zip(radii)
        .filter(|(sel, _)| **sel)
        .map(|(_, r)| PI * r * r)
        .sum::<f64>()
        / task.area()
}

/// Coverage rate ς, clamped to 1 for reporting.
pub fn coverage(selection: &[bool], radii: &[f64], task: &TaskCommand) -> f64 {
    coverage_raw(selection, radii, task).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Weight force G (N).
    pub weight_force: f64,
    /// Water density ρ_L (kg/m³).
    pub water_density: f64,
    /// Cross-sectional area A (m²).
    pub cross_section: f64,
    /// Drag coefficient C_d.
    pub drag_coefficient: f64,
    /// Exploration energy per swept area κ (J/m²).
    pub exploration_density: f64,
    /// Electrical-to-acoustic conversion efficiency Υ in (0, 1].
    pub conversion_efficiency: f64,
    /// Collected data per swept area φ (bits/m²).
    pub data_density: f64,
    /// Sonar scan rate ϖ (rad/s).
    pub scan_rate: f64,
    /// Speed of sound v_u (m/s).
    pub sound_speed: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            weight_force: 981.0,
            water_density: 1025.0,
            cross_section: 0.1,
            drag_coefficient: 0.8,
            exploration_density: 1.0,
            conversion_efficiency: 0.5,
            data_density: 1000.0,
            scan_rate: PI / 5.0,
            sound_speed: 1500.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), DomainError> {
        let positive = [
            ("weight_force", self.weight_force),
            ("water_density", self.water_density),
            ("cross_section", self.cross_section),
            ("drag_coefficient", self.drag_coefficient),
            ("exploration_density", self.exploration_density),
            ("conversion_efficiency", self.conversion_efficiency),
            ("data_density", self.data_density),
            ("scan_rate", self.scan_rate),
            ("sound_speed", self.sound_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DomainError::range(name, "> 0", v));
            }
        }
        if self.conversion_efficiency > 1.0 {
            return Err(DomainError::range("conversion_efficiency", "<= 1", self.conversion_efficiency));
        }
        Ok(())
    }
}

/// Command dispatch delay: propagation d/v_u plus transmission bits/rate.
/// A zero rate yields +∞ (the task cannot be dispatched).
pub fn dispatch_delay(d_nc: f64, command_bits: f64, rate: f64, ep: &EnergyParams) -> f64 {
    if !(rate > 0.0) {
        return f64::INFINITY;
    }
    d_nc / ep.sound_speed + command_bits / rate
}

pub fn scan_delay(ep: &EnergyParams) -> f64 {
    2.0 * PI / ep.scan_rate
}

pub fn collected_data(r_n: f64, ep: &EnergyParams) -> f64 {
    ep.data_density * PI * r_n * r_n
}

/// Upload delay; +∞ when the rate is zero.
pub fn upload_delay(data_bits: f64, rate: f64, d_nc: f64, ep: &EnergyParams) -> f64 {
    if !(rate > 0.0) {
        return f64::INFINITY;
    }
    data_bits / rate + d_nc / ep.sound_speed
}

/// The four phase delays of one selected AUV in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDelays {
    pub dispatch: f64,
    pub movement: f64,
    pub scan: f64,
    pub upload: f64,
    /// Arrived and finished uploading within the slice horizon.
    pub completed: bool,
}

impl PhaseDelays {
    pub fn total(&self) -> f64 {
        self.dispatch + self.movement + self.scan + self.upload
    }
}

/// Slot delay: the slowest selected AUV's four-phase sum.
pub fn task_delay(phases: &[PhaseDelays]) -> Result<f64, DomainError> {
    if phases.is_empty() {
        return Err(DomainError::EmptySelection);
    }
    Ok(phases.iter().map(PhaseDelays::total).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MobilityEnergy {
    pub horizontal: f64,
    pub vertical: f64,
    pub drag: f64,
}

impl MobilityEnergy {
    pub fn total(&self) -> f64 {
        self.horizontal + self.vertical + self.drag
    }
}

/// Mobility energy over one slice of length `dt`: induced (horizontal),
/// ascent against weight, and hydrodynamic drag on the water-relative velocity.
pub fn mobility_energy(v_ground: &Vec3, v_rel: &Vec3, dt: f64, ep: &EnergyParams) -> MobilityEnergy {
    let g = ep.weight_force;
    let a_rho = ep.cross_section * ep.water_density;
    let h2 = v_ground.x * v_ground.x + v_ground.y * v_ground.y;
    let horizontal = (g * g * dt / (std::f64::consts::SQRT_2 * a_rho))
        / (h2 + h2 * h2 + g * g / (a_rho * a_rho)).sqrt();
    let vertical = g * v_ground.z.max(0.0) * dt;
    let speed = v_rel.norm();
    let drag = 0.5 * ep.cross_section * ep.drag_coefficient * ep.water_density * dt * speed * speed * speed;
    MobilityEnergy {
        horizontal,
        vertical,
        drag,
    }
}

pub fn exploration_energy(r_n: f64, ep: &EnergyParams) -> f64 {
    PI * r_n * r_n * ep.exploration_density
}

/// Electrical energy for an upload, (P/Υ)·(D/R); +∞ when the rate is zero.
pub fn upload_energy(power: f64, data_bits: f64, rate: f64, ep: &EnergyParams) -> f64 {
    if data_bits == 0.0 || power == 0.0 {
        return 0.0;
    }
    if !(rate > 0.0) {
        return f64::INFINITY;
    }
    power / ep.conversion_efficiency * (data_bits / rate)
}

/// Remaining energy after one accounting step. Not clamped: negative values
/// flag a violated energy constraint.
pub fn remaining_energy(previous: f64, mobility: f64, exploration: f64, upload: f64) -> f64 {
    previous - mobility - exploration - upload
}

/// η = ς / T_task.
pub fn cooperation_efficiency(coverage: f64, task_delay: f64) -> Result<f64, DomainError> {
    if !(task_delay > 0.0) {
        return Err(DomainError::range("task_delay", "> 0 s", task_delay));
    }
    Ok(coverage / task_delay)
}
