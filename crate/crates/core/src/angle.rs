//! Angle helpers. All headings are radians measured counterclockwise from +x.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Wraps into (−π, π].
pub fn wrap(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Wraps into (−π/2, π/2], treating headings that differ by π as equivalent.
pub fn wrap_half(a: f64) -> f64 {
    let mut r = a.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r -= PI;
    }
    r
}
