//! Kinematic surface-bound simulation with a rollout tracker.

use crate::angle::wrap;
use crate::lift::{lift_state, roll_pitch, State2D, State3D};
use crate::optimizer::Trajectory;
use crate::planner::{line_to_goal, replan_step, replan_step_with_path, PlannerConfig, ReplanOutcome};
use crate::stability::stability_at;
use crate::terrain::{GridMap, RobotGeometry};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Rollout steps.
    pub horizon: usize,
    pub rollout_dt: f64,
    pub speed_samples: usize,
    pub turn_samples: usize,
    pub heading_weight: f64,
    pub terminal_weight: f64,
    /// Distance beyond which the robot is considered off the trajectory.
    pub recovery_radius: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            rollout_dt: 0.1,
            speed_samples: 7,
            turn_samples: 9,
            heading_weight: 0.3,
            terminal_weight: 2.0,
            recovery_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub max_time: f64,
    pub tracker: TrackerConfig,
    pub planner: PlannerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 0.05, max_time: 90.0, tracker: TrackerConfig::default(), planner: PlannerConfig::default() }
    }
}

impl SimConfig {
    pub fn v_max(&self) -> f64 {
        self.planner.optimizer.graph.limits.v_max
    }

    pub fn omega_max(&self) -> f64 {
        self.planner.optimizer.graph.limits.omega_max
    }

    pub fn a_max(&self) -> f64 {
        self.planner.optimizer.graph.limits.a_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose2d: State2D,
    pub pose3d: State3D,
    pub v: f64,
    pub omega: f64,
    pub t: f64,
}

impl RobotState {
    pub fn at_rest(map: &GridMap, pose: State2D) -> Result<Self> {
        Ok(Self { pose2d: pose, pose3d: lift_state(map, &pose)?, v: 0.0, omega: 0.0, t: 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSignal {
    pub v: f64,
    pub omega: f64,
}

/// Polyline through the trajectory states with cumulative arc length.
struct Track {
    pts: Vec<Vec2>,
    arc: Vec<f64>,
}

impl Track {
    fn new(traj: &Trajectory) -> Self {
        let mut pts: Vec<Vec2> = Vec::with_capacity(traj.len());
        for s in traj.states() {
            if pts.last().is_none_or(|q| (s.position() - q).norm() > 1e-9) {
                pts.push(s.position());
            }
        }
        let mut arc = vec![0.0];
        for w in pts.windows(2) {
            arc.push(arc.last().unwrap() + (w[1] - w[0]).norm());
        }
        Self { pts, arc }
    }

    fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Distance, arc position and tangent azimuth of the closest point.
    fn project(&self, p: Vec2) -> (f64, f64, f64) {
        if self.pts.len() == 1 {
            return ((p - self.pts[0]).norm(), 0.0, 0.0);
        }
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for k in 0..self.pts.len() - 1 {
            let (a, b) = (self.pts[k], self.pts[k + 1]);
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let d = (a + ab * t - p).norm();
            if d < best.0 {
                best = (d, self.arc[k] + t * (self.arc[k + 1] - self.arc[k]), ab.y.atan2(ab.x));
            }
        }
        best
    }

    fn point_at(&self, s: f64) -> Vec2 {
        if self.pts.len() == 1 || s >= self.length() {
            return *self.pts.last().unwrap();
        }
        let k = self.arc.partition_point(|&a| a <= s).saturating_sub(1).min(self.pts.len() - 2);
        let t = (s - self.arc[k]) / (self.arc[k + 1] - self.arc[k]);
        self.pts[k] + (self.pts[k + 1] - self.pts[k]) * t
    }
}

fn ramp(v: f64, target: f64, a_max: f64, dt: f64) -> f64 {
    v + (target - v).clamp(-a_max * dt, a_max * dt)
}

/// Best first control of a lattice of constant-command rollouts.
pub fn track_control(robot: &RobotState, traj: &Trajectory, cfg: &SimConfig) -> Result<ControlSignal> {
    let track = Track::new(traj);
    let p = robot.pose2d.position();
    let (dist, s_near, _) = track.project(p);
    let tc = &cfg.tracker;
    if dist > tc.recovery_radius {
        return Err(Error::TrackingLost { distance: dist });
    }
    let (v_max, w_max, a_max) = (cfg.v_max(), cfg.omega_max(), cfg.a_max());
    let horizon_time = tc.horizon as f64 * tc.rollout_dt;
    let target = track.point_at(s_near + v_max * horizon_time);
    let mut best = (f64::INFINITY, ControlSignal { v: 0.0, omega: 0.0 });
    for iv in 0..tc.speed_samples {
        let v_cmd = v_max * iv as f64 / (tc.speed_samples - 1).max(1) as f64;
        for iw in 0..tc.turn_samples {
            let w_cmd = -w_max + 2.0 * w_max * iw as f64 / (tc.turn_samples - 1).max(1) as f64;
            let (mut x, mut y, mut th, mut v) = (p.x, p.y, robot.pose2d.theta, robot.v);
            let mut cost = 0.0;
            for _ in 0..tc.horizon {
                v = ramp(v, v_cmd, a_max, tc.rollout_dt);
                th += w_cmd * tc.rollout_dt;
                x += v * th.cos() * tc.rollout_dt;
                y += v * th.sin() * tc.rollout_dt;
                let (d, _, tangent) = track.project(Vec2::new(x, y));
                let he = if track.length() > 1e-9 { wrap(th - tangent) } else { 0.0 };
                cost += d * d + tc.heading_weight * he * he;
            }
            cost /= tc.horizon as f64;
            cost += tc.terminal_weight * (Vec2::new(x, y) - target).norm_squared();
            if cost < best.0 - 1e-12 {
                best = (cost, ControlSignal { v: v_cmd, omega: w_cmd });
            }
        }
    }
    Ok(best.1)
}

/// Unicycle update with acceleration clamping, followed by re-lifting.
pub fn step(robot: &RobotState, u: &ControlSignal, dt: f64, map: &GridMap, cfg: &SimConfig) -> Result<RobotState> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(Error::InvalidParam(format!("time step {dt} outside (0, 0.1]")));
    }
    let target = u.v.clamp(-cfg.v_max(), cfg.v_max());
    let v = ramp(robot.v, target, cfg.a_max(), dt);
    let omega = u.omega.clamp(-cfg.omega_max(), cfg.omega_max());
    let bx = robot.pose3d.b_x();
    let psi = if bx.x.hypot(bx.y) > 1e-12 { bx.y.atan2(bx.x) } else { robot.pose2d.theta };
    let pose2d = State2D::new(
        robot.pose2d.x + v * psi.cos() * dt,
        robot.pose2d.y + v * psi.sin() * dt,
        robot.pose2d.theta + omega * dt,
    );
    let pose3d = lift_state(map, &pose2d).map_err(|_| Error::OutOfBounds { x: pose2d.x, y: pose2d.y })?;
    Ok(RobotState { pose2d, pose3d, v, omega, t: robot.t + dt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Goal,
    TipOver,
    Timeout,
    PlannerFailure,
    OutOfBounds,
}

impl Verdict {
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Goal => "goal",
            Verdict::TipOver => "tip-over",
            Verdict::Timeout => "timeout",
            Verdict::PlannerFailure => "planner-failure",
            Verdict::OutOfBounds => "out-of-bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub pose: State2D,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub v: f64,
    pub omega: f64,
    pub traj_id: usize,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    pub verdict: Verdict,
    pub message: Option<String>,
    /// Cells reported by a failing planner.
    pub blocking_cells: Vec<(usize, usize)>,
    /// Accepted plans, indexed by `traj_id`.
    pub trajectories: Vec<Trajectory>,
}

impl RunLog {
    pub fn all_stable(&self) -> bool {
        self.rows.iter().all(|r| r.stable)
    }

    pub fn final_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NavMode {
    /// Planner only, straight-line initialization.
    TargetOnly,
    /// Planner initialized from waypoints.
    Waypoints(Vec<Vec2>),
    /// Track the unoptimized straight line.
    Baseline,
}

fn row(robot: &RobotState, traj_id: usize, stable: bool) -> LogRow {
    let a = roll_pitch(&robot.pose3d);
    LogRow {
        t: robot.t,
        pose: robot.pose2d,
        z: robot.pose3d.position.z,
        roll: a.roll,
        pitch: a.pitch,
        v: robot.v,
        omega: robot.omega,
        traj_id,
        stable,
    }
}

pub fn run_navigation(
    map: &GridMap,
    geom: &RobotGeometry,
    start: &State2D,
    goal: Vec2,
    cfg: &SimConfig,
    mode: &NavMode,
) -> RunLog {
    let mut log = RunLog {
        rows: Vec::new(),
        verdict: Verdict::Timeout,
        message: None,
        blocking_cells: Vec::new(),
        trajectories: Vec::new(),
    };
    let mut robot = match RobotState::at_rest(map, *start) {
        Ok(r) => r,
        Err(e) => {
            log.verdict = Verdict::OutOfBounds;
            log.message = Some(e.to_string());
            return log;
        }
    };
    let heading = (goal.y - start.y).atan2(goal.x - start.x);
    let goal_state = State2D::new(goal.x, goal.y, heading);
    let eta = cfg.planner.goal_tolerance;
    let mut next_replan = 0.0;
    let mut force_replan = false;
    loop {
        let stable = stability_at(map, &robot.pose2d, geom).map(|s| s.stable).unwrap_or(false);
        let traj_id = log.trajectories.len().saturating_sub(1);
        log.rows.push(row(&robot, traj_id, stable));
        if !stable {
            log.verdict = Verdict::TipOver;
            return log;
        }
        if robot.pose2d.distance(&goal_state) <= eta {
            log.verdict = Verdict::Goal;
            return log;
        }
        if robot.t >= cfg.max_time {
            log.verdict = Verdict::Timeout;
            return log;
        }
        let need_plan = log.trajectories.is_empty() || force_replan || robot.t + 1e-9 >= next_replan;
        if need_plan {
            let forced = std::mem::take(&mut force_replan);
            match mode {
                NavMode::Baseline => {
                    if log.trajectories.is_empty() || forced {
                        match line_to_goal(&robot.pose2d, &goal_state, cfg.planner.spacing, cfg.v_max()) {
                            Ok(t) => log.trajectories.push(t),
                            Err(e) => {
                                log.verdict = Verdict::PlannerFailure;
                                log.message = Some(e.to_string());
                                return log;
                            }
                        }
                    }
                }
                NavMode::TargetOnly | NavMode::Waypoints(_) => {
                    let prev = log.trajectories.last();
                    let out = match mode {
                        NavMode::Waypoints(w) if prev.is_none() => {
                            replan_step_with_path(None, w, &robot.pose2d, &goal_state, map, geom, &cfg.planner)
                        }
                        _ => replan_step(prev, &robot.pose2d, &goal_state, map, geom, &cfg.planner),
                    };
                    match out {
                        Ok(ReplanOutcome::Planned(p)) => log.trajectories.push(p.trajectory),
                        Ok(ReplanOutcome::Reached) => {
                            log.verdict = Verdict::Goal;
                            return log;
                        }
                        Err(e) => {
                            log.verdict = Verdict::PlannerFailure;
                            if let Error::Infeasible { cells } = &e {
                                log.blocking_cells = cells.clone();
                            }
                            log.message = Some(e.to_string());
                            return log;
                        }
                    }
                }
            }
            next_replan = robot.t + cfg.planner.replan_period;
        }
        let traj = log.trajectories.last().expect("a plan exists");
        let u = match track_control(&robot, traj, cfg) {
            Ok(u) => u,
            Err(Error::TrackingLost { distance }) => {
                if matches!(mode, NavMode::Baseline) {
                    match line_to_goal(&robot.pose2d, &goal_state, cfg.planner.spacing, cfg.v_max()) {
                        Ok(t) => log.trajectories.push(t),
                        Err(e) => {
                            log.verdict = Verdict::PlannerFailure;
                            log.message = Some(e.to_string());
                            return log;
                        }
                    }
                } else if log.trajectories.len() > 1 && next_replan > robot.t + 1e-9 {
                    force_replan = true;
                    continue;
                } else {
                    log.verdict = Verdict::PlannerFailure;
                    log.message = Some(format!("tracking lost {distance:.3} m from the fresh plan"));
                    return log;
                }
                continue;
            }
            Err(e) => {
                log.verdict = Verdict::PlannerFailure;
                log.message = Some(e.to_string());
                return log;
            }
        };
        match step(&robot, &u, cfg.dt, map, cfg) {
            Ok(r) => robot = r,
            Err(e) => {
                log.verdict = Verdict::OutOfBounds;
                log.message = Some(e.to_string());
                return log;
            }
        }
    }
}
