//! Planar rigid-body poses and body-frame velocities.
//!
//! Everything lives in SE(2). Systems confined to the x axis reuse the same
//! types with `y == 0` and `heading == 0`; all operations preserve that
//! subgroup exactly.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Below this |ω·dt| the SE(2) exponential switches to its series form.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Pose of the body frame in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Default for GroupElement {
    fn default() -> Self {
        Self::identity()
    }
}

impl GroupElement {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        }
    }

    /// The SE(2) group law `self ∘ other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let (s, c) = self.heading.sin_cos();
        GroupElement {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            heading: wrap_angle(self.heading + other.heading),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        let (s, c) = self.heading.sin_cos();
        GroupElement {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            heading: wrap_angle(-self.heading),
        }
    }

    /// Converts a world-frame velocity `(ẋ, ẏ, θ̇)` into the body frame (`g⁻¹ġ`).
    pub fn world_to_body(&self, gdot_world: [f64; 3]) -> BodyVelocity {
        let (s, c) = self.heading.sin_cos();
        BodyVelocity {
            vx: c * gdot_world[0] + s * gdot_world[1],
            vy: -s * gdot_world[0] + c * gdot_world[1],
            omega_z: gdot_world[2],
        }
    }

    pub fn body_to_world(&self, xi: &BodyVelocity) -> [f64; 3] {
        let (s, c) = self.heading.sin_cos();
        [c * xi.vx - s * xi.vy, s * xi.vx + c * xi.vy, xi.omega_z]
    }

    /// `self ∘ exp(dt·xi)` with the closed-form SE(2) exponential.
    pub fn exp_step(&self, xi: &BodyVelocity, dt: f64) -> GroupElement {
        self.compose(&exp(xi, dt))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }
}

/// The group exponential `exp(dt·xi)`.
pub fn exp(xi: &BodyVelocity, dt: f64) -> GroupElement {
    let th = xi.omega_z * dt;
    let (ux, uy) = (xi.vx * dt, xi.vy * dt);
    // V = [[a, -b], [b, a]] with a = sin θ / θ, b = (1 - cos θ) / θ = 2 sin²(θ/2) / θ
    let (a, b) = if th.abs() < SMALL_ANGLE {
        (1.0 - th * th / 6.0, th / 2.0 - th * th * th / 24.0)
    } else {
        (th.sin() / th, 2.0 * (0.5 * th).sin().powi(2) / th)
    };
    GroupElement {
        x: a * ux - b * uy,
        y: b * ux + a * uy,
        heading: wrap_angle(th),
    }
}

/// Velocity of the body frame expressed in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub vx: f64,
    pub vy: f64,
    pub omega_z: f64,
}

impl BodyVelocity {
    pub fn new(vx: f64, vy: f64, omega_z: f64) -> Self {
        Self { vx, vy, omega_z }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds from the first `group_dim` entries (1 → x only, 3 → full twist).
    pub fn from_slice(v: &[f64]) -> Self {
        match v.len() {
            1 => Self::new(v[0], 0.0, 0.0),
            3 => Self::new(v[0], v[1], v[2]),
            n => panic!("body velocity needs 1 or 3 components, got {n}"),
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.omega_z]
    }

    /// The leading `group_dim` components.
    pub fn components(&self, group_dim: usize) -> Vec<f64> {
        self.to_array()[..group_dim].to_vec()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.vx * s, self.vy * s, self.omega_z * s)
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega_z.is_finite()
    }
}

impl std::ops::Add for BodyVelocity {
    type Output = BodyVelocity;
    fn add(self, o: BodyVelocity) -> BodyVelocity {
        BodyVelocity::new(self.vx + o.vx, self.vy + o.vy, self.omega_z + o.omega_z)
    }
}
