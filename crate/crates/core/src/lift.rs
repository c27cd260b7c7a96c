//! Planar states and their surface-bound 3D poses.
//!
//! Headings are measured counterclockwise from +x, so `b_yaw = (cos θ, sin θ, 0)`.

use crate::angle::wrap;
use crate::gnf::query_field;
use crate::terrain::GridMap;
use crate::{Error, Mat3, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl State2D {
    /// Wraps `theta` into (−π, π].
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap(theta) }
    }

    pub fn position(&self) -> crate::Vec2 {
        crate::Vec2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &State2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn yaw_vector(&self) -> Vec3 {
        Vec3::new(self.theta.cos(), self.theta.sin(), 0.0)
    }
}

/// Pose on the terrain surface; `rotation` columns are `b_x`, `b_y`, `b_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State3D {
    pub rotation: Mat3,
    pub position: Vec3,
}

impl State3D {
    pub fn b_x(&self) -> Vec3 {
        self.rotation.column(0).into()
    }

    pub fn b_y(&self) -> Vec3 {
        self.rotation.column(1).into()
    }

    pub fn b_z(&self) -> Vec3 {
        self.rotation.column(2).into()
    }

    /// `max |RᵀR − I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity()).abs().max()
    }
}

pub fn lift_state(map: &GridMap, s: &State2D) -> Result<State3D> {
    let field = query_field(map, s.x, s.y)?;
    lift_on_normal(s, field.z, &field.n)
}

/// Lift with an explicit elevation and ground normal.
pub fn lift_on_normal(s: &State2D, z: f64, n: &Vec3) -> Result<State3D> {
    let b_z = n.normalize();
    let left = Vec3::z().cross(&s.yaw_vector());
    let raw = left.cross(&b_z);
    if raw.norm() < 1e-12 || b_z.z <= 0.0 {
        return Err(Error::DegenerateGeometry("heading is parallel to the ground normal".into()));
    }
    let b_x = raw.normalize();
    let b_y = b_z.cross(&b_x);
    Ok(State3D { rotation: Mat3::from_columns(&[b_x, b_y, b_z]), position: Vec3::new(s.x, s.y, z) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attitude {
    pub roll: f64,
    /// Positive nose-up.
    pub pitch: f64,
    /// `|pitch| > 89°`; the roll value is unreliable.
    pub gimbal: bool,
}

/// Yaw-pitch-roll decomposition of the pose rotation.
pub fn roll_pitch(state: &State3D) -> Attitude {
    let r = &state.rotation;
    let pitch = r[(2, 0)].clamp(-1.0, 1.0).asin();
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    Attitude { roll, pitch, gimbal: pitch.abs() > 89f64.to_radians() }
}
