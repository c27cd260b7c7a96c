//! Factor graph over interior states and transit times.

use crate::angle::wrap;
use crate::lift::State2D;
use crate::optimizer::lm::{central_jacobian, LeastSquares};
use crate::optimizer::residuals::{hinge, kinematic_residual, Limits};
use crate::optimizer::trajectory::{segment_velocity, Trajectory, DT_MIN};
use crate::par::{map_slice, Execution};
use crate::stability::{orientation_at, OrientationSet};
use crate::terrain::{GridMap, RobotGeometry};
use crate::{Result, Vec2};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Time,
    Capsize,
    Kinematic,
    Limit,
}

/// Penalty weights γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub time: f64,
    pub capsize: f64,
    pub kinematic: f64,
    pub limit: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { time: 1.0, capsize: 50.0, kinematic: 100.0, limit: 10.0 }
    }
}

impl Weights {
    pub fn of(&self, kind: FactorKind) -> f64 {
        match kind {
            FactorKind::Time => self.time,
            FactorKind::Capsize => self.capsize,
            FactorKind::Kinematic => self.kinematic,
            FactorKind::Limit => self.limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    pub weight: f64,
    /// Referenced state indices.
    pub states: Vec<usize>,
    /// Referenced transit-time indices.
    pub dts: Vec<usize>,
    /// Capsize factor on a blocked state.
    pub infeasible: bool,
    /// θ∇ of the range center targeted by a capsize factor.
    pub target: Option<f64>,
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self.kind {
            FactorKind::Time | FactorKind::Capsize => 1,
            FactorKind::Kinematic => 2,
            FactorKind::Limit => 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PenaltyGraph {
    base: Trajectory,
    factors: Vec<Factor>,
    orientations: Vec<Option<OrientationSet>>,
    limits: Limits,
    bounds: (Vec2, Vec2),
}

/// Variables are `(x, y, θ)` of states `1..n-1`, followed by all transit times.
impl PenaltyGraph {
    pub fn trajectory(&self) -> &Trajectory {
        &self.base
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn count(&self, kind: FactorKind) -> usize {
        self.factors.iter().filter(|f| f.kind == kind).count()
    }

    /// Orientation set of each state at build time; `None` where the field cannot be queried.
    pub fn orientations(&self) -> &[Option<OrientationSet>] {
        &self.orientations
    }

    /// States whose capsize factor is marked infeasible.
    pub fn blocked(&self) -> Vec<usize> {
        self.factors.iter().filter(|f| f.infeasible).flat_map(|f| f.states.iter().copied()).collect()
    }

    /// Range center chosen for each state, used for hysteresis in the next build.
    pub fn centers(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.base.len()];
        for f in self.factors.iter().filter(|f| f.kind == FactorKind::Capsize) {
            let k = f.states[0];
            out[k] = f.target.zip(self.orientations[k].as_ref()).map(|(c, o)| o.world(c));
        }
        out
    }

    fn free_states(&self) -> usize {
        self.base.len() - 2
    }

    pub fn state_var(&self, k: usize) -> Option<usize> {
        (k >= 1 && k + 1 < self.base.len()).then(|| 3 * (k - 1))
    }

    pub fn dt_var(&self, i: usize) -> usize {
        3 * self.free_states() + i
    }

    pub fn variables_of(&self, f: &Factor) -> Vec<usize> {
        let mut v: Vec<usize> =
            f.states.iter().filter_map(|&k| self.state_var(k)).flat_map(|b| [b, b + 1, b + 2]).collect();
        v.extend(f.dts.iter().map(|&i| self.dt_var(i)));
        v
    }

    pub fn initial_vector(&self) -> DVector<f64> {
        self.pack(&self.base)
    }

    pub fn pack(&self, traj: &Trajectory) -> DVector<f64> {
        let mut x = DVector::zeros(self.num_vars());
        for k in 1..traj.len() - 1 {
            let b = 3 * (k - 1);
            let s = traj.states()[k];
            x[b] = s.x;
            x[b + 1] = s.y;
            x[b + 2] = s.theta;
        }
        for (i, d) in traj.dts().iter().enumerate() {
            x[self.dt_var(i)] = *d;
        }
        x
    }

    /// Endpoints are copied from the build trajectory untouched.
    pub fn unpack(&self, x: &DVector<f64>) -> Result<Trajectory> {
        let n = self.base.len();
        let mut states = Vec::with_capacity(n);
        states.push(self.base.states()[0]);
        for k in 1..n - 1 {
            let b = 3 * (k - 1);
            states.push(State2D::new(x[b], x[b + 1], x[b + 2]));
        }
        states.push(self.base.states()[n - 1]);
        let dts = (0..n - 1).map(|i| x[self.dt_var(i)]).collect();
        Trajectory::new(states, dts)
    }

    fn state(&self, x: &DVector<f64>, k: usize) -> State2D {
        match self.state_var(k) {
            Some(b) => State2D { x: x[b], y: x[b + 1], theta: x[b + 2] },
            None => self.base.states()[k],
        }
    }

    fn dt(&self, x: &DVector<f64>, i: usize) -> f64 {
        x[self.dt_var(i)].max(DT_MIN)
    }

    /// Weighted residual block of one factor.
    pub fn evaluate(&self, f: &Factor, x: &DVector<f64>, out: &mut [f64]) {
        let sw = f.weight.sqrt();
        match f.kind {
            FactorKind::Time => out[0] = sw * self.dt(x, f.dts[0]),
            FactorKind::Capsize => {
                let k = f.states[0];
                out[0] = match (f.target, &self.orientations[k]) {
                    (Some(c), Some(o)) => sw * wrap(o.relative(self.state(x, k).theta) - c),
                    _ => 0.0,
                }
            }
            FactorKind::Kinematic => {
                let r = kinematic_residual(&self.state(x, f.states[0]), &self.state(x, f.states[1]));
                out[0] = sw * r[0];
                out[1] = sw * r[1];
            }
            FactorKind::Limit => {
                let s: Vec<State2D> = f.states.iter().map(|&k| self.state(x, k)).collect();
                let (d0, d1) = (self.dt(x, f.dts[0]), self.dt(x, f.dts[1]));
                let v0 = segment_velocity(&s[0], &s[1], d0);
                let v1 = segment_velocity(&s[1], &s[2], d1);
                let k = 2.0 / (d0 + d1);
                let l = &self.limits;
                let m = l.margin;
                out[0] = sw * hinge(v0[0], l.v_max, m);
                out[1] = sw * hinge(v1[0], l.v_max, m);
                out[2] = sw * hinge(v0[1], l.omega_max, m);
                out[3] = sw * hinge(v1[1], l.omega_max, m);
                out[4] = sw * hinge(k * (v1[0] - v0[0]), l.a_max, m);
                out[5] = sw * hinge(k * (v1[1] - v0[1]), l.alpha_max, m);
            }
        }
    }

    pub fn residual_dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).sum()
    }

    pub fn all_residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.residual_dim());
        let mut row = 0;
        for f in &self.factors {
            let d = f.dim();
            self.evaluate(f, x, &mut r.as_mut_slice()[row..row + d]);
            row += d;
        }
        r
    }

    /// Total weighted cost `½‖r‖²`.
    pub fn cost(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.all_residuals(x).norm_squared()
    }

    /// Per-kind cost breakdown.
    pub fn cost_by_kind(&self, x: &DVector<f64>, kind: FactorKind) -> f64 {
        let mut buf = [0.0; 6];
        self.factors
            .iter()
            .filter(|f| f.kind == kind)
            .map(|f| {
                let d = f.dim();
                self.evaluate(f, x, &mut buf[..d]);
                0.5 * buf[..d].iter().map(|v| v * v).sum::<f64>()
            })
            .sum()
    }

    /// Central-difference Jacobian of one factor with respect to its own variables.
    pub fn local_jacobian(&self, f: &Factor, x: &DVector<f64>, step: f64) -> (Vec<usize>, DMatrix<f64>) {
        let vars = self.variables_of(f);
        let d = f.dim();
        let mut jac = DMatrix::zeros(d, vars.len());
        let mut probe = x.clone();
        let mut hi = [0.0; 6];
        let mut lo = [0.0; 6];
        for (c, &v) in vars.iter().enumerate() {
            let x0 = probe[v];
            probe[v] = x0 + step;
            self.evaluate(f, &probe, &mut hi[..d]);
            probe[v] = x0 - step;
            self.evaluate(f, &probe, &mut lo[..d]);
            probe[v] = x0;
            for r in 0..d {
                jac[(r, c)] = (hi[r] - lo[r]) / (2.0 * step);
            }
        }
        (vars, jac)
    }

    /// Global Jacobian assembled from local factor blocks.
    pub fn assembled_jacobian(&self, x: &DVector<f64>, step: f64) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.residual_dim(), self.num_vars());
        let mut row = 0;
        for f in &self.factors {
            let (vars, local) = self.local_jacobian(f, x, step);
            for (c, &v) in vars.iter().enumerate() {
                for r in 0..f.dim() {
                    jac[(row + r, v)] = local[(r, c)];
                }
            }
            row += f.dim();
        }
        jac
    }

    /// Full-residual central differences, independent of the factor structure.
    pub fn reference_jacobian(&self, x: &DVector<f64>, step: f64) -> DMatrix<f64> {
        central_jacobian(|v| Ok(self.all_residuals(v)), x, step).expect("residuals are infallible")
    }
}

impl LeastSquares for PenaltyGraph {
    fn num_vars(&self) -> usize {
        3 * self.free_states() + self.base.len() - 1
    }

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.all_residuals(x))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.assembled_jacobian(x, 1e-5))
    }

    fn project(&self, x: &mut DVector<f64>) {
        let (lo, hi) = self.bounds;
        for k in 1..self.base.len() - 1 {
            let b = 3 * (k - 1);
            x[b] = x[b].clamp(lo.x, hi.x);
            x[b + 1] = x[b + 1].clamp(lo.y, hi.y);
        }
        for i in 0..self.base.len() - 1 {
            let v = self.dt_var(i);
            x[v] = x[v].max(DT_MIN);
        }
    }
}

/// Region in which the field can be queried, shrunk by a small safety band.
pub fn queryable_bounds(map: &GridMap) -> (Vec2, Vec2) {
    let (lo, hi) = map.bounds();
    let inset = 1.5 * map.resolution() + 1e-6;
    let lo = lo + Vec2::new(inset, inset);
    let hi = hi - Vec2::new(inset, inset);
    (lo, Vec2::new(hi.x.max(lo.x), hi.y.max(lo.y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GraphOptions {
    pub weights: Weights,
    pub limits: Limits,
}

pub fn build_graph(traj: &Trajectory, map: &GridMap, geom: &RobotGeometry, opts: &GraphOptions) -> PenaltyGraph {
    build_graph_with_hysteresis(traj, map, geom, opts, &[])
}

/// `previous` holds the range center chosen for each state in an earlier build, if any.
pub fn build_graph_with_hysteresis(
    traj: &Trajectory,
    map: &GridMap,
    geom: &RobotGeometry,
    opts: &GraphOptions,
    previous: &[Option<f64>],
) -> PenaltyGraph {
    let n = traj.len();
    let w = &opts.weights;
    let orientations: Vec<Option<OrientationSet>> =
        map_slice(Execution::Sequential, traj.states(), |s| orientation_at(map, geom, s.x, s.y).ok());
    let mut factors = Vec::with_capacity(4 * n);
    let plain = |kind, states: Vec<usize>, dts: Vec<usize>| Factor {
        kind,
        weight: w.of(kind),
        states,
        dts,
        infeasible: false,
        target: None,
    };
    for i in 0..n - 1 {
        factors.push(plain(FactorKind::Time, vec![], vec![i]));
    }
    for (k, s) in traj.states().iter().enumerate() {
        let mut f = plain(FactorKind::Capsize, vec![k], vec![]);
        match &orientations[k] {
            Some(o) => {
                f.infeasible = o.is_blocked();
                f.target = o.nearest_arc(s.theta, previous.get(k).copied().flatten()).map(|a| a.center);
            }
            None => f.infeasible = true,
        }
        factors.push(f);
    }
    for i in 0..n - 1 {
        factors.push(plain(FactorKind::Kinematic, vec![i, i + 1], vec![]));
    }
    for k in 1..n.saturating_sub(1) {
        factors.push(plain(FactorKind::Limit, vec![k - 1, k, k + 1], vec![k - 1, k]));
    }
    PenaltyGraph { base: traj.clone(), factors, orientations, limits: opts.limits, bounds: queryable_bounds(map) }
}
