//! Time-elastic-band trajectory optimization.
//!
//! A [`Trajectory`] alternates planar states and transit times. [`build_graph`] turns it into
//! weighted penalties (time, capsize, kinematic arc condition, speed/acceleration hinges)
//! and [`lm_solve`] minimizes their squared sum. [`optimize`] rebuilds the graph a few times
//! so that the orientation sets follow the moving states.

mod graph;
mod lm;
mod residuals;
mod trajectory;

pub use graph::{
    build_graph, build_graph_with_hysteresis, queryable_bounds, Factor, FactorKind, GraphOptions, PenaltyGraph,
    Weights,
};
pub use lm::{central_jacobian, lm_solve, LeastSquares, LmOptions, LmReport, Termination};
pub use residuals::{capsize_residual, hinge, kinematic_residual, limit_residual, CapsizeResidual, Limits};
pub use trajectory::{finite_diff, segment_velocity, KinematicSample, Trajectory, DT_MIN};

use crate::terrain::{GridMap, RobotGeometry};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub graph: GraphOptions,
    pub lm: LmOptions,
    /// Rebuild-and-solve rounds.
    pub rounds: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { graph: GraphOptions::default(), lm: LmOptions::default(), rounds: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub lm_iterations: usize,
    /// Cost of the solved trajectory, re-evaluated on a freshly built graph.
    pub cost: f64,
    pub blocked: Vec<usize>,
    pub termination: Termination,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub trajectory: Trajectory,
    pub cost: f64,
    /// States of the returned trajectory that sit on blocked ground.
    pub blocked: Vec<usize>,
    pub rounds: Vec<RoundSummary>,
    /// Accepted costs of every LM solve, concatenated.
    pub accepted_costs: Vec<Vec<f64>>,
}

impl OptimizeReport {
    pub fn lm_iterations(&self) -> usize {
        self.rounds.iter().map(|r| r.lm_iterations).sum()
    }
}

/// Rebuild-and-solve loop; keeps the lowest-cost trajectory seen, including the input.
pub fn optimize(traj: &Trajectory, map: &GridMap, geom: &RobotGeometry, cfg: &OptimizerConfig) -> Result<OptimizeReport> {
    let graph = build_graph(traj, map, geom, &cfg.graph);
    let mut best = (traj.clone(), graph.cost(&graph.initial_vector()), graph.blocked());
    let mut current = traj.clone();
    let mut centers = graph.centers();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut accepted_costs = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let graph = build_graph_with_hysteresis(&current, map, geom, &cfg.graph, &centers);
        let report = lm_solve(&graph, &graph.initial_vector(), &cfg.lm)?;
        current = graph.unpack(&report.x)?;
        let check = build_graph_with_hysteresis(&current, map, geom, &cfg.graph, &graph.centers());
        centers = check.centers();
        let cost = check.cost(&check.initial_vector());
        let blocked = check.blocked();
        rounds.push(RoundSummary {
            lm_iterations: report.iterations,
            cost,
            blocked: blocked.clone(),
            termination: report.termination,
        });
        accepted_costs.push(report.accepted_costs);
        let better = (blocked.len(), cost) < (best.2.len(), best.1);
        if better {
            best = (current.clone(), cost, blocked);
        }
        if report.iterations == 0 {
            break;
        }
    }
    Ok(OptimizeReport { trajectory: best.0, cost: best.1, blocked: best.2, rounds, accepted_costs })
}
