//! Replanning loop: initialization, warm start, validation and recovery from blocked ground.

use crate::angle::wrap;
use crate::lift::State2D;
use crate::optimizer::{build_graph, optimize, OptimizerConfig, Trajectory, DT_MIN};
use crate::stability::{orientation_at, OrientationSet};
use crate::terrain::{GridMap, RobotGeometry};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Goal tolerance η, meters.
    pub goal_tolerance: f64,
    /// Simulated seconds between replans.
    pub replan_period: f64,
    /// Largest lateral displacement tried when reseeding, in multiples of `spacing`.
    pub reseed_budget: usize,
    /// Reseed-and-resolve attempts per replan.
    pub reseed_attempts: usize,
    /// Distance between consecutive initial states, meters.
    pub spacing: f64,
    /// Fraction by which the support rectangle is shrunk while planning.
    pub stability_margin: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            goal_tolerance: 0.2,
            replan_period: 0.5,
            reseed_budget: 12,
            reseed_attempts: 4,
            spacing: 0.25,
            stability_margin: 0.15,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.into()));
        if !(self.goal_tolerance > 0.0) {
            return bad("goal tolerance must be positive");
        }
        if !(self.spacing > 0.0) {
            return bad("state spacing must be positive");
        }
        if !(self.replan_period > 0.0) {
            return bad("replan period must be positive");
        }
        if self.reseed_budget == 0 || self.reseed_attempts == 0 || self.optimizer.rounds == 0 {
            return bad("budgets must be at least 1");
        }
        if !(0.0..0.9).contains(&self.stability_margin) {
            return bad("stability margin must lie in [0, 0.9)");
        }
        Ok(())
    }

    fn v_max(&self) -> f64 {
        self.optimizer.graph.limits.v_max
    }
}

/// Straight-line initialization with headings along the segment.
pub fn line_to_goal(start: &State2D, goal: &State2D, spacing: f64, v_max: f64) -> Result<Trajectory> {
    if start.distance(goal) < 1e-9 {
        return Trajectory::new(vec![*start, *start], vec![DT_MIN]);
    }
    resample(&[start.position(), goal.position()], spacing, v_max)
}

/// Arc-length resampling of a waypoint path, with tangent headings.
pub fn seed_from_path(waypoints: &[Vec2], spacing: f64, v_max: f64) -> Result<Trajectory> {
    if waypoints.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::Input("waypoint is not finite".into()));
    }
    let mut pts: Vec<Vec2> = Vec::with_capacity(waypoints.len());
    for p in waypoints {
        if pts.last().is_none_or(|q| (p - q).norm() > 1e-9) {
            pts.push(*p);
        }
    }
    if pts.len() < 2 {
        return Err(Error::Input("waypoint path needs at least two distinct points".into()));
    }
    resample(&pts, spacing, v_max)
}

fn resample(pts: &[Vec2], spacing: f64, v_max: f64) -> Result<Trajectory> {
    if !(spacing > 0.0 && v_max > 0.0) {
        return Err(Error::InvalidParam("spacing and speed must be positive".into()));
    }
    let seg_len: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = seg_len.iter().sum();
    let n = ((total / spacing).ceil() as usize).max(1) + 1;
    let step = total / (n - 1) as f64;
    let heading = |k: usize| {
        let d = pts[k + 1] - pts[k];
        d.y.atan2(d.x)
    };
    let mut states = Vec::with_capacity(n);
    let (mut seg, mut seg_start) = (0usize, 0.0f64);
    for k in 0..n {
        let s = if k + 1 == n { total } else { k as f64 * step };
        while seg + 1 < seg_len.len() && s >= seg_start + seg_len[seg] {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let p = if k + 1 == n {
            pts[pts.len() - 1]
        } else {
            let t = ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0);
            pts[seg] + (pts[seg + 1] - pts[seg]) * t
        };
        states.push(State2D::new(p.x, p.y, heading(seg)));
    }
    let dt = step / (0.5 * v_max);
    Trajectory::new(states, vec![dt; n - 1])
}

/// Keeps the part of `prev` ahead of the robot and prepends the robot state.
pub fn warm_start(prev: &Trajectory, robot: &State2D, spacing: f64) -> Result<Trajectory> {
    let s = prev.states();
    let p = robot.position();
    let (mut best_j, mut best_t, mut best_d) = (0, 0.0, f64::INFINITY);
    for j in 0..s.len() - 1 {
        let (a, b) = (s[j].position(), s[j + 1].position());
        let ab = b - a;
        let t = if ab.norm_squared() < 1e-18 { 0.0 } else { ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0) };
        let d = (a + ab * t - p).norm();
        if d < best_d {
            (best_j, best_t, best_d) = (j, t, d);
        }
    }
    let mut states = vec![*robot];
    let mut dts = vec![];
    let mut first_dt = prev.dts()[best_j] * (1.0 - best_t);
    let mut next = best_j + 1;
    if next + 1 < s.len() && robot.distance(&s[next]) < 0.5 * spacing {
        first_dt += prev.dts()[next];
        next += 1;
    }
    dts.push(first_dt.max(DT_MIN));
    states.push(s[next]);
    for k in next + 1..s.len() {
        states.push(s[k]);
        dts.push(prev.dts()[k - 1]);
    }
    Trajectory::new(states, dts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// Interior state nearest to the problem.
    pub state: usize,
    pub position: Vec2,
    pub blocked: bool,
}

fn heading_ok(set: &OrientationSet, theta: f64) -> bool {
    set.is_traversable(theta) || set.is_traversable(wrap(theta + std::f64::consts::PI))
}

/// States and segment midpoints whose heading is outside the traversable set.
pub fn validate(traj: &Trajectory, map: &GridMap, geom: &RobotGeometry) -> Vec<Violation> {
    let s = traj.states();
    let n = s.len();
    let mut out: Vec<Violation> = Vec::new();
    let mut push = |k: usize, position: Vec2, blocked: bool| {
        if !out.iter().any(|v| v.state == k) {
            out.push(Violation { state: k, position, blocked });
        }
    };
    for (k, st) in s.iter().enumerate() {
        match orientation_at(map, geom, st.x, st.y) {
            Ok(set) if set.is_traversable(st.theta) => {}
            Ok(set) => push(k, st.position(), set.is_blocked()),
            Err(_) => push(k, st.position(), true),
        }
    }
    for k in 0..n - 1 {
        let (a, b) = (s[k].position(), s[k + 1].position());
        let d = b - a;
        if d.norm() < 1e-9 {
            continue;
        }
        let mid = (a + b) * 0.5;
        let chord = d.y.atan2(d.x);
        let bad = match orientation_at(map, geom, mid.x, mid.y) {
            Ok(set) => (!heading_ok(&set, chord)).then_some(set.is_blocked()),
            Err(_) => Some(true),
        };
        if let Some(blocked) = bad {
            for j in [k, k + 1] {
                if j > 0 && j + 1 < n {
                    push(j, mid, blocked);
                }
            }
            if n == 2 {
                push(0, mid, blocked);
            }
        }
    }
    out.sort_by_key(|v| v.state);
    out
}

fn cells_of(map: &GridMap, pts: impl IntoIterator<Item = Vec2>) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = pts.into_iter().filter_map(|p| map.cell_at(p.x, p.y).ok()).collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

fn tangent(s: &[State2D], k: usize) -> Vec2 {
    let a = s[k.saturating_sub(1)].position();
    let b = s[(k + 1).min(s.len() - 1)].position();
    let d = b - a;
    if d.norm() < 1e-9 {
        Vec2::new(s[k].theta.cos(), s[k].theta.sin())
    } else {
        d / d.norm()
    }
}

/// Displaces runs of offending interior states sideways until their ground is usable.
///
/// For each contiguous run the smallest multiple of `spacing` is chosen, trying both sides
/// at every step and preferring the side with the gentler ground. Neighbours are tapered
/// so that the displaced run stays connected to the rest of the trajectory.
pub fn reseed_blocked(
    traj: &Trajectory,
    blocked: &[usize],
    map: &GridMap,
    geom: &RobotGeometry,
    spacing: f64,
    budget: usize,
) -> Result<Trajectory> {
    let n = traj.len();
    let mut idx: Vec<usize> = blocked.iter().copied().filter(|&k| k > 0 && k + 1 < n).collect();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return Ok(traj.clone());
    }
    let s = traj.states();
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for k in idx {
        match runs.last_mut() {
            Some(r) if *r.last().unwrap() + 1 == k => r.push(k),
            _ => runs.push(vec![k]),
        }
    }
    let mut offset = vec![Vec2::zeros(); n];
    for run in &runs {
        let normals: Vec<Vec2> = run
            .iter()
            .map(|&k| {
                let t = tangent(s, k);
                Vec2::new(-t.y, t.x)
            })
            .collect();
        let score = |k: usize, side: f64| -> Option<(bool, f64)> {
            let mut all_heading = true;
            let mut worst = 0.0f64;
            for (r, &i) in run.iter().enumerate() {
                let p = s[i].position() + normals[r] * (side * k as f64 * spacing);
                let set = orientation_at(map, geom, p.x, p.y).ok()?;
                if set.is_blocked() {
                    return None;
                }
                let t = tangent(s, i);
                all_heading &= heading_ok(&set, t.y.atan2(t.x));
                worst = worst.max(set.projection_length);
            }
            Some((all_heading, worst))
        };
        let mut choice: Option<(usize, f64)> = None;
        let mut fallback: Option<(usize, f64)> = None;
        for k in 1..=budget {
            let mut cands: Vec<(f64, bool, f64)> = [1.0, -1.0]
                .into_iter()
                .filter_map(|side| score(k, side).map(|(ok, l)| (side, ok, l)))
                .collect();
            cands.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)));
            if let Some(&(side, ok, _)) = cands.first() {
                if ok {
                    choice = Some((k, side));
                    break;
                }
                fallback.get_or_insert((k, side));
            }
        }
        let Some((k, side)) = choice.or(fallback) else {
            return Err(Error::Infeasible { cells: cells_of(map, run.iter().map(|&i| s[i].position())) });
        };
        let taper = k + 1;
        let (first, last) = (run[0], *run.last().unwrap());
        for (r, &i) in run.iter().enumerate() {
            offset[i] = normals[r] * (side * k as f64 * spacing);
        }
        for d in 1..=taper {
            let w = 1.0 - d as f64 / (taper + 1) as f64;
            for (i, anchor) in [(first.checked_sub(d), first), (Some(last + d), last)] {
                let Some(i) = i.filter(|&i| i > 0 && i + 1 < n) else { continue };
                let cand = offset[anchor] * w;
                if cand.norm() > offset[i].norm() {
                    offset[i] = cand;
                }
            }
        }
    }
    let positions: Vec<Vec2> = s.iter().zip(&offset).map(|(st, o)| st.position() + o).collect();
    let mut states = Vec::with_capacity(n);
    for k in 0..n {
        if k == 0 || k + 1 == n {
            states.push(s[k]);
            continue;
        }
        let d = positions[k + 1] - positions[k - 1];
        let theta = if offset[k].norm() > 0.0 && d.norm() > 1e-9 { d.y.atan2(d.x) } else { s[k].theta };
        states.push(State2D::new(positions[k].x, positions[k].y, theta));
    }
    let dts = (0..n - 1)
        .map(|i| {
            let len = (positions[i + 1] - positions[i]).norm();
            let old = s[i].distance(&s[i + 1]);
            if old > 1e-9 { traj.dts()[i] * (len / old).max(1.0) } else { traj.dts()[i] }
        })
        .collect();
    Trajectory::new(states, dts)
}

#[derive(Debug, Clone)]
pub struct PlanReport {
    pub trajectory: Trajectory,
    pub lm_iterations: usize,
    pub reseeds: usize,
    pub warm_started: bool,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub enum ReplanOutcome {
    /// The robot is within the goal tolerance.
    Reached,
    Planned(PlanReport),
}

/// Endpoints are fixed and checked separately, so only interior violations count.
fn interior_violations(traj: &Trajectory, map: &GridMap, geom: &RobotGeometry) -> Vec<Violation> {
    let n = traj.len();
    let mut v = validate(traj, map, geom);
    v.retain(|v| v.state > 0 && v.state + 1 < n);
    v
}

/// Stable for some heading under the true geometry.
fn endpoint_usable(map: &GridMap, geom: &RobotGeometry, p: Vec2) -> bool {
    orientation_at(map, geom, p.x, p.y).map(|s| !s.is_blocked()).unwrap_or(false)
}

pub fn replan_step(
    prev: Option<&Trajectory>,
    robot: &State2D,
    goal: &State2D,
    map: &GridMap,
    geom: &RobotGeometry,
    cfg: &PlannerConfig,
) -> Result<ReplanOutcome> {
    plan_or_restart(prev, None, robot, goal, map, geom, cfg)
}

/// Like [`replan_step`] but seeded from a waypoint path when there is no previous plan.
pub fn replan_step_with_path(
    prev: Option<&Trajectory>,
    waypoints: &[Vec2],
    robot: &State2D,
    goal: &State2D,
    map: &GridMap,
    geom: &RobotGeometry,
    cfg: &PlannerConfig,
) -> Result<ReplanOutcome> {
    plan_or_restart(prev, Some(waypoints), robot, goal, map, geom, cfg)
}

/// Falls back to a cold start when a warm-started plan is infeasible.
fn plan_or_restart(
    prev: Option<&Trajectory>,
    waypoints: Option<&[Vec2]>,
    robot: &State2D,
    goal: &State2D,
    map: &GridMap,
    geom: &RobotGeometry,
    cfg: &PlannerConfig,
) -> Result<ReplanOutcome> {
    match plan_from(prev, waypoints, robot, goal, map, geom, cfg) {
        Err(Error::Infeasible { .. }) if prev.is_some_and(|p| p.goal().distance(goal) < 1e-9) => {
            plan_from(None, None, robot, goal, map, geom, cfg)
        }
        out => out,
    }
}

fn plan_from(
    prev: Option<&Trajectory>,
    waypoints: Option<&[Vec2]>,
    robot: &State2D,
    goal: &State2D,
    map: &GridMap,
    geom: &RobotGeometry,
    cfg: &PlannerConfig,
) -> Result<ReplanOutcome> {
    cfg.validate()?;
    if !map.contains(robot.x, robot.y) {
        return Err(Error::OutOfBounds { x: robot.x, y: robot.y });
    }
    if !map.contains(goal.x, goal.y) {
        return Err(Error::OutOfBounds { x: goal.x, y: goal.y });
    }
    if robot.distance(goal) <= cfg.goal_tolerance {
        return Ok(ReplanOutcome::Reached);
    }
    for p in [robot.position(), goal.position()] {
        if !endpoint_usable(map, geom, p) {
            return Err(Error::Infeasible { cells: cells_of(map, [p]) });
        }
    }
    let prev = prev.filter(|p| p.goal().distance(goal) < 1e-9);
    let warm_started = prev.is_some();
    let mut init = match (prev, waypoints) {
        (Some(p), _) => warm_start(p, robot, cfg.spacing)?,
        (None, path) => {
            let mut t = match path {
                Some(w) => {
                    let mut pts = vec![robot.position()];
                    pts.extend(w.iter().copied());
                    pts.push(goal.position());
                    for p in &pts {
                        if !map.contains(p.x, p.y) {
                            return Err(Error::Input(format!("waypoint ({}, {}) is outside the map", p.x, p.y)));
                        }
                    }
                    seed_from_path(&pts, cfg.spacing, cfg.v_max())?
                }
                None => line_to_goal(robot, goal, cfg.spacing, cfg.v_max())?,
            };
            let mut states = t.states().to_vec();
            states[0] = *robot;
            t = Trajectory::new(states, t.dts().to_vec())?;
            t
        }
    };
    let plan_geom = geom.shrunk(cfg.stability_margin);
    if !warm_started {
        for _ in 0..cfg.reseed_attempts {
            let violations = interior_violations(&init, map, &plan_geom);
            if violations.is_empty() {
                break;
            }
            let targets: Vec<usize> = violations.iter().map(|v| v.state).collect();
            init = reseed_blocked(&init, &targets, map, &plan_geom, cfg.spacing, cfg.reseed_budget)?;
        }
    }
    let mut lm_iterations = 0;
    let mut last_violations = Vec::new();
    let planned = |trajectory, cost, reseeds, lm_iterations| {
        Ok(ReplanOutcome::Planned(PlanReport { trajectory, lm_iterations, reseeds, warm_started, cost }))
    };
    for attempt in 0..=cfg.reseed_attempts {
        let report = optimize(&init, map, &plan_geom, &cfg.optimizer)?;
        lm_iterations += report.lm_iterations();
        let violations = interior_violations(&report.trajectory, map, &plan_geom);
        if violations.is_empty() {
            return planned(report.trajectory, report.cost, attempt, lm_iterations);
        }
        if interior_violations(&init, map, &plan_geom).is_empty() {
            let base_cost = plan_cost(&init, map, &plan_geom, &cfg.optimizer);
            match backtrack(&init, base_cost, &report.trajectory, map, &plan_geom, &cfg.optimizer) {
                Some((t, _)) if attempt < cfg.reseed_attempts => {
                    init = t;
                    continue;
                }
                Some((t, cost)) => return planned(t, cost, attempt, lm_iterations),
                None => return planned(init, base_cost, attempt, lm_iterations),
            }
        }
        let targets: Vec<usize> = violations.iter().map(|v| v.state).collect();
        if attempt == cfg.reseed_attempts {
            last_violations = violations;
            break;
        }
        init = reseed_blocked(&report.trajectory, &targets, map, &plan_geom, cfg.spacing, cfg.reseed_budget)?;
    }
    Err(Error::Infeasible { cells: cells_of(map, last_violations.iter().map(|v| v.position)) })
}

fn plan_cost(traj: &Trajectory, map: &GridMap, geom: &RobotGeometry, cfg: &OptimizerConfig) -> f64 {
    let g = build_graph(traj, map, geom, &cfg.graph);
    g.cost(&g.initial_vector())
}

/// Point-wise interpolation between two trajectories of equal length.
fn blend(a: &Trajectory, b: &Trajectory, t: f64) -> Result<Trajectory> {
    let states = a
        .states()
        .iter()
        .zip(b.states())
        .map(|(p, q)| State2D::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y), p.theta + t * wrap(q.theta - p.theta)))
        .collect();
    let dts = a.dts().iter().zip(b.dts()).map(|(p, q)| p + t * (q - p)).collect();
    Trajectory::new(states, dts)
}

/// Longest step from the feasible `from` towards `to` that stays feasible and lowers the cost.
fn backtrack(
    from: &Trajectory,
    from_cost: f64,
    to: &Trajectory,
    map: &GridMap,
    geom: &RobotGeometry,
    cfg: &OptimizerConfig,
) -> Option<(Trajectory, f64)> {
    if from.len() != to.len() {
        return None;
    }
    let mut t = 0.5;
    for _ in 0..5 {
        let cand = blend(from, to, t).ok()?;
        if interior_violations(&cand, map, geom).is_empty() {
            let cost = plan_cost(&cand, map, geom, cfg);
            if cost < from_cost {
                return Some((cand, cost));
            }
        }
        t *= 0.5;
    }
    None
}
