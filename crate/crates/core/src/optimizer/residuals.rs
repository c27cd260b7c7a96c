//! Unweighted residuals of the individual penalties.

use crate::angle::{wrap, wrap_half};
use crate::lift::State2D;
use crate::optimizer::trajectory::KinematicSample;
use crate::stability::OrientationSet;

/// Velocity and acceleration bounds of the chassis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub v_max: f64,
    pub omega_max: f64,
    pub a_max: f64,
    pub alpha_max: f64,
    /// Hinges start this far below each bound.
    pub margin: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { v_max: 0.8, omega_max: 1.2, a_max: 0.5, alpha_max: 1.0, margin: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapsizeResidual {
    pub value: f64,
    /// World heading of the range center that was targeted.
    pub center: Option<f64>,
    pub blocked: bool,
}

/// Wrapped difference between θ∇ and the nearest range center.
pub fn capsize_residual(s: &State2D, orient: &OrientationSet, preferred: Option<f64>) -> CapsizeResidual {
    if orient.is_blocked() {
        return CapsizeResidual { value: 0.0, center: None, blocked: true };
    }
    match orient.nearest_arc(s.theta, preferred) {
        Some(a) => CapsizeResidual {
            value: wrap(orient.relative(s.theta) - a.center),
            center: Some(orient.world(a.center)),
            blocked: false,
        },
        None => CapsizeResidual { value: 0.0, center: None, blocked: false },
    }
}

/// Arc condition for a differential-drive segment.
///
/// Both headings must make equal angles with the chord, i.e. their circular mean must lie
/// along the chord (modulo π, so reversing is allowed). Returns the per-heading correction.
pub fn kinematic_residual(a: &State2D, b: &State2D) -> [f64; 2] {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx.hypot(dy) < 1e-9 {
        return [0.0, 0.0];
    }
    let chord = dy.atan2(dx);
    let mean = a.theta + 0.5 * wrap(b.theta - a.theta);
    let d = wrap_half(mean - chord);
    [d, d]
}

pub fn hinge(x: f64, limit: f64, margin: f64) -> f64 {
    (x.abs() - limit + margin).max(0.0)
}

/// Hinges on linear speed, yaw rate, linear and angular acceleration.
pub fn limit_residual(sample: &KinematicSample, limits: &Limits) -> [f64; 4] {
    let m = limits.margin;
    let [v, w] = sample.velocity;
    let [a, al] = sample.accel.unwrap_or([0.0, 0.0]);
    [hinge(v, limits.v_max, m), hinge(w, limits.omega_max, m), hinge(a, limits.a_max, m), hinge(al, limits.alpha_max, m)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::traversable_orientation;
    use crate::terrain::RobotGeometry;
    use crate::Vec3;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn normal_for_length(l: f64) -> Vec3 {
        let a = (l / 0.35f64).atan();
        Vec3::new(-a.sin(), 0.0, a.cos())
    }

    #[test]
    fn capsize_cases() {
        let g = RobotGeometry::default();
        let free = traversable_orientation(&g, &Vec3::z()).unwrap();
        assert_eq!(capsize_residual(&State2D::new(0.0, 0.0, 2.0), &free, None).value, 0.0);

        let narrow = traversable_orientation(&g, &normal_for_length(0.5)).unwrap();
        let c = capsize_residual(&State2D::new(0.0, 0.0, narrow.world(0.7)), &narrow, None);
        assert!((c.center.unwrap() - narrow.world(0.5758904894642405)).abs() < 1e-9);
        assert!((c.value - 0.12410951053575947).abs() < 1e-9);
        let c = capsize_residual(&State2D::new(0.0, 0.0, narrow.world(0.5758904894642405)), &narrow, None);
        assert!(c.value.abs() < 1e-9);

        let blocked = traversable_orientation(&g, &normal_for_length(0.6)).unwrap();
        let c = capsize_residual(&State2D::new(0.0, 0.0, 0.0), &blocked, None);
        assert!(c.blocked);
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn kinematic_cases() {
        let r = kinematic_residual(&State2D::new(0.0, 0.0, 0.3), &State2D::new(2.0 * 0.3f64.cos(), 2.0 * 0.3f64.sin(), 0.3));
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);
        let r = kinematic_residual(&State2D::new(0.0, 0.0, 0.0), &State2D::new(1.0, 1.0, FRAC_PI_2));
        assert!(r[0].abs() < 1e-12);
        let r = kinematic_residual(&State2D::new(0.0, 0.0, FRAC_PI_2), &State2D::new(1.0, 0.0, FRAC_PI_2));
        assert!((r[0].abs() - FRAC_PI_2).abs() < 1e-12 && r[0] == r[1]);
        let r = kinematic_residual(&State2D::new(0.0, 0.0, 0.0), &State2D::new(0.0, 0.0, 1.0));
        assert_eq!(r, [0.0, 0.0]);
        // reversing along the chord
        let r = kinematic_residual(&State2D::new(0.0, 0.0, PI), &State2D::new(1.0, 0.0, PI));
        assert!(r[0].abs() < 1e-12);
    }

    #[test]
    fn hinge_cases() {
        let l = Limits::default();
        let s = KinematicSample { velocity: [0.5, 0.2], accel: Some([0.1, 0.1]), clamped: false };
        assert_eq!(limit_residual(&s, &l), [0.0; 4]);
        let s = KinematicSample { velocity: [0.9, 0.0], accel: None, clamped: false };
        assert!((limit_residual(&s, &l)[0] - 0.15).abs() < 1e-12);
        assert_eq!(hinge(0.75, 0.8, 0.05), 0.0);
        assert!((hinge(-0.6, 0.5, 0.05) - 0.15).abs() < 1e-12);
    }
}
