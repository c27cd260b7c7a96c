//! Dense Levenberg–Marquardt with Nielsen damping updates.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// A nonlinear least-squares problem `min ½‖r(x)‖²`.
pub trait LeastSquares {
    fn num_vars(&self) -> usize;

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Central differences by default.
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        central_jacobian(|v| self.residuals(v), x, 1e-5)
    }

    /// Maps a trial point back onto the feasible set.
    fn project(&self, _x: &mut DVector<f64>) {}
}

pub fn central_jacobian<F>(f: F, x: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let m = f(x)?.len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.clone();
    for k in 0..x.len() {
        let x0 = probe[k];
        probe[k] = x0 + step;
        let hi = f(&probe)?;
        probe[k] = x0 - step;
        let lo = f(&probe)?;
        probe[k] = x0;
        jac.set_column(k, &((hi - lo) / (2.0 * step)));
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iters: usize,
    /// Stop once an accepted step lowers the cost by less than this.
    pub cost_tol: f64,
    pub grad_tol: f64,
    /// Relative step size below which the iterate is considered stationary.
    pub step_tol: f64,
    pub tau: f64,
    pub max_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iters: 50, cost_tol: 1e-10, grad_tol: 1e-10, step_tol: 1e-12, tau: 1e-3, max_damping: 1e12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CostTolerance,
    Gradient,
    StepTolerance,
    MaxIterations,
    DampingCap,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: DVector<f64>,
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    /// Cost after each accepted step, starting with the initial cost.
    pub accepted_costs: Vec<f64>,
    pub termination: Termination,
    pub diagnostic: Option<String>,
}

fn cost_of(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

pub fn lm_solve<P: LeastSquares + ?Sized>(problem: &P, x0: &DVector<f64>, opts: &LmOptions) -> Result<LmReport> {
    if x0.len() != problem.num_vars() {
        return Err(Error::InvalidParam(format!(
            "initial point has {} entries, problem has {} variables",
            x0.len(),
            problem.num_vars()
        )));
    }
    let mut x = x0.clone();
    problem.project(&mut x);
    let mut r = problem.residuals(&x)?;
    let mut cost = cost_of(&r);
    let initial_cost = cost;
    let mut accepted_costs = vec![cost];
    let report = |x: DVector<f64>, cost, iterations, accepted_costs, termination, diagnostic| LmReport {
        x,
        initial_cost,
        cost,
        iterations,
        accepted_costs,
        termination,
        diagnostic,
    };
    if x.is_empty() {
        return Ok(report(x, cost, 0, accepted_costs, Termination::Gradient, None));
    }

    let mut jac = problem.jacobian(&x)?;
    let mut jtj = jac.transpose() * &jac;
    let mut grad = jac.transpose() * &r;
    let mut mu = opts.tau * jtj.diagonal().max().max(1e-12);
    let mut nu = 2.0;

    for iter in 0..opts.max_iters {
        if grad.amax() < opts.grad_tol {
            return Ok(report(x, cost, iter, accepted_costs, Termination::Gradient, None));
        }
        let mut lhs = jtj.clone();
        for k in 0..lhs.nrows() {
            lhs[(k, k)] += mu;
        }
        let Some(chol) = lhs.cholesky() else {
            mu *= nu;
            nu *= 2.0;
            if mu > opts.max_damping {
                let msg = "normal equations stayed singular up to the damping cap".to_string();
                return Ok(report(x, cost, iter, accepted_costs, Termination::DampingCap, Some(msg)));
            }
            continue;
        };
        let h = -chol.solve(&grad);
        let mut trial = &x + &h;
        problem.project(&mut trial);
        let step = &trial - &x;
        if step.norm() <= opts.step_tol * (x.norm() + opts.step_tol) {
            return Ok(report(x, cost, iter, accepted_costs, Termination::StepTolerance, None));
        }
        let trial_r = problem.residuals(&trial).ok();
        let trial_cost = trial_r.as_ref().map(cost_of).unwrap_or(f64::INFINITY);
        let predicted = 0.5 * step.dot(&(step.scale(mu) - &grad));
        let rho = if predicted > 0.0 { (cost - trial_cost) / predicted } else { -1.0 };
        if trial_cost < cost && rho > 0.0 {
            let decrease = cost - trial_cost;
            x = trial;
            r = trial_r.expect("finite cost implies residuals");
            cost = trial_cost;
            accepted_costs.push(cost);
            if decrease < opts.cost_tol {
                return Ok(report(x, cost, iter + 1, accepted_costs, Termination::CostTolerance, None));
            }
            jac = problem.jacobian(&x)?;
            jtj = jac.transpose() * &jac;
            grad = jac.transpose() * &r;
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
            if mu > opts.max_damping {
                let msg = "no descent step found below the damping cap".to_string();
                return Ok(report(x, cost, iter + 1, accepted_costs, Termination::DampingCap, Some(msg)));
            }
        }
    }
    Ok(report(x, cost, opts.max_iters, accepted_costs, Termination::MaxIterations, None))
}
