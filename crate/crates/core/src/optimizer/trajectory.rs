use crate::angle::wrap;
use crate::lift::State2D;
use crate::{Error, Result};

/// Smallest admissible transit time, seconds.
pub const DT_MIN: f64 = 1e-3;

/// Alternating sequence of planar states and transit times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<State2D>,
    dts: Vec<f64>,
}

impl Trajectory {
    /// Transit times below [`DT_MIN`] are raised to it.
    pub fn new(states: Vec<State2D>, dts: Vec<f64>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidParam(format!("trajectory needs at least 2 states, got {}", states.len())));
        }
        if dts.len() + 1 != states.len() {
            return Err(Error::InvalidParam(format!(
                "{} states need {} transit times, got {}",
                states.len(),
                states.len() - 1,
                dts.len()
            )));
        }
        if states.iter().any(|s| !(s.x.is_finite() && s.y.is_finite() && s.theta.is_finite())) {
            return Err(Error::InvalidParam("trajectory state is not finite".into()));
        }
        if dts.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParam("transit time is not finite".into()));
        }
        let dts = dts.into_iter().map(|d| d.max(DT_MIN)).collect();
        Ok(Self { states, dts })
    }

    pub fn states(&self) -> &[State2D] {
        &self.states
    }

    pub fn dts(&self) -> &[f64] {
        &self.dts
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn start(&self) -> &State2D {
        &self.states[0]
    }

    pub fn goal(&self) -> &State2D {
        self.states.last().expect("trajectory has at least two states")
    }

    pub fn total_time(&self) -> f64 {
        self.dts.iter().sum()
    }

    pub fn path_length(&self) -> f64 {
        self.states.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// Arrival time at each state, starting at 0.
    pub fn timestamps(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.len());
        out.push(0.0);
        for d in &self.dts {
            t += d;
            out.push(t);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    /// Signed linear speed and yaw rate over the segment leaving state `i`.
    pub velocity: [f64; 2],
    /// Linear and angular acceleration at the junction after segment `i`, if it exists.
    pub accel: Option<[f64; 2]>,
    /// A transit time was below the floor and got clamped.
    pub clamped: bool,
}

/// Speed along the mean heading and wrapped yaw rate between two states.
pub fn segment_velocity(a: &State2D, b: &State2D, dt: f64) -> [f64; 2] {
    let dtheta = wrap(b.theta - a.theta);
    let mean = a.theta + 0.5 * dtheta;
    let along = (b.x - a.x) * mean.cos() + (b.y - a.y) * mean.sin();
    [along / dt, dtheta / dt]
}

/// Velocity of segment `i` and, when segment `i + 1` exists, the acceleration between them.
pub fn finite_diff(traj: &Trajectory, i: usize) -> Result<KinematicSample> {
    let n = traj.len();
    if i + 1 >= n {
        return Err(Error::InvalidParam(format!("no segment leaves state {i} of {n}")));
    }
    let s = traj.states();
    let mut clamped = false;
    let mut dt = |k: usize| {
        let d = traj.dts()[k];
        if d < DT_MIN {
            clamped = true;
        }
        d.max(DT_MIN)
    };
    let dt_i = dt(i);
    let v0 = segment_velocity(&s[i], &s[i + 1], dt_i);
    let accel = if i + 2 < n {
        let dt_j = dt(i + 1);
        let v1 = segment_velocity(&s[i + 1], &s[i + 2], dt_j);
        let k = 2.0 / (dt_i + dt_j);
        Some([k * (v1[0] - v0[0]), k * (v1[1] - v0[1])])
    } else {
        None
    };
    Ok(KinematicSample { velocity: v0, accel, clamped })
}
