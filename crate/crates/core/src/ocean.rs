//! Analytic ocean-current field and vehicle kinematics.
//!
//! The current is a superposition of Lamb–Oseen vortices with vertical axes
//! plus a uniform drift. Vehicles are advected: ground velocity is the
//! commanded (water-relative) velocity plus the local current.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vortex {
    /// Any point on the (vertical) vortex axis.
    pub center: Vec3,
    /// Circulation Γ (m²/s); positive is counter-clockwise seen from above.
    pub circulation: f64,
    /// Core radius r_c (m).
    pub core_radius: f64,
}

impl Vortex {
    /// Horizontal velocity induced at `p`.
    pub fn velocity_at(&self, p: &Vec3) -> Vec3 {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let r2 = dx * dx + dy * dy;
        let rc2 = self.core_radius * self.core_radius;
        // v_θ / r = Γ (1 - exp(-r²/rc²)) / (2π r²), finite as r -> 0
        let shape = if r2 > 0.0 {
            -(-r2 / rc2).exp_m1() / r2
        } else {
            1.0 / rc2
        };
        let scale = self.circulation / (2.0 * PI) * shape;
        Vec3::new(-dy * scale, dx * scale, 0.0)
    }

    /// Tangential speed at horizontal distance `r` from the axis.
    pub fn tangential_speed(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let rc2 = self.core_radius * self.core_radius;
        self.circulation / (2.0 * PI * r) * -(-(r * r) / rc2).exp_m1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VortexField {
    pub vortices: Vec<Vortex>,
    pub background_drift: Vec3,
}

impl Default for VortexField {
    fn default() -> Self {
        Self {
            vortices: vec![
                Vortex {
                    center: Vec3::new(60.0, 140.0, 0.0),
                    circulation: 50.0,
                    core_radius: 30.0,
                },
                Vortex {
                    center: Vec3::new(140.0, 60.0, 0.0),
                    circulation: -50.0,
                    core_radius: 30.0,
                },
            ],
            background_drift: Vec3::new(0.1, 0.1, 0.0),
        }
    }
}

impl VortexField {
    pub fn still() -> Self {
        Self {
            vortices: Vec::new(),
            background_drift: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for v in &self.vortices {
            if !(v.core_radius > 0.0) {
                return Err(DomainError::range("core_radius", "> 0 m", v.core_radius));
            }
            if !v.circulation.is_finite() {
                return Err(DomainError::range("circulation", "finite", v.circulation));
            }
        }
        Ok(())
    }
}

pub fn current_at(p: &Vec3, field: &VortexField) -> Vec3 {
    field
        .vortices
        .iter()
        .fold(field.background_drift, |acc, v| acc + v.velocity_at(p))
}

/// Velocity of the vehicle relative to the surrounding water, V' = V - V_T.
pub fn relative_velocity(v: &Vec3, p: &Vec3, field: &VortexField) -> Vec3 {
    v - current_at(p, field)
}

/// Axis-aligned simulation box: x, y in [0, extent], z in [-depth, 0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldBounds {
    pub extent: f64,
    pub depth: f64,
}

impl WorldBounds {
    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(0.0, self.extent),
            p.y.clamp(0.0, self.extent),
            p.z.clamp(-self.depth, 0.0),
        )
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.extent).contains(&p.x)
            && (0.0..=self.extent).contains(&p.y)
            && (-self.depth..=0.0).contains(&p.z)
    }

    pub fn diagonal(&self) -> f64 {
        (2.0 * self.extent * self.extent + self.depth * self.depth).sqrt()
    }
}

/// One explicit Euler step, clamped to the box.
pub fn integrate_motion(p: &Vec3, v_ground: &Vec3, dt: f64, bounds: &WorldBounds) -> Vec3 {
    bounds.clamp(&(p + v_ground * dt))
}
