//! `key = value` configuration files overriding [`SimConfig`] defaults.
//!
//! Blank lines and `#` comments are ignored. Recognised keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `gamma_t`, `gamma_theta`, `gamma_kappa`, `gamma_u` | penalty weights |
//! | `eta` | goal tolerance, m |
//! | `spacing` | initial state spacing, m |
//! | `n_iter` | rebuild-and-solve rounds |
//! | `lm_max_iters` | LM iterations per round |
//! | `dt` | simulation step, s |
//! | `max_time` | simulation timeout, s |
//! | `replan_period` | s |
//! | `reseed_budget`, `reseed_attempts` | recovery budgets |
//! | `stability_margin` | planning footprint shrink fraction |
//! | `v_max`, `omega_max`, `a_max`, `alpha_max`, `limit_margin` | chassis limits |
//! | `horizon`, `recovery_radius` | tracker settings |

use crate::sim::SimConfig;
use crate::{Error, Result, Vec2};
use std::path::Path;

pub fn parse_config(text: &str, base: SimConfig) -> Result<SimConfig> {
    let mut cfg = base;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse { line, msg: format!("expected `key = value`, got `{content}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, msg: format!("`{key}` needs a number, got `{value}`") })
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::Parse { line, msg: format!("`{key}` needs a non-negative integer, got `{value}`") })
        };
        let p = &mut cfg.planner;
        let o = &mut p.optimizer;
        match key {
            "gamma_t" => o.graph.weights.time = num()?,
            "gamma_theta" => o.graph.weights.capsize = num()?,
            "gamma_kappa" => o.graph.weights.kinematic = num()?,
            "gamma_u" => o.graph.weights.limit = num()?,
            "eta" => p.goal_tolerance = num()?,
            "spacing" => p.spacing = num()?,
            "n_iter" => o.rounds = count()?,
            "lm_max_iters" => o.lm.max_iters = count()?,
            "replan_period" => p.replan_period = num()?,
            "reseed_budget" => p.reseed_budget = count()?,
            "reseed_attempts" => p.reseed_attempts = count()?,
            "stability_margin" => p.stability_margin = num()?,
            "v_max" => o.graph.limits.v_max = num()?,
            "omega_max" => o.graph.limits.omega_max = num()?,
            "a_max" => o.graph.limits.a_max = num()?,
            "alpha_max" => o.graph.limits.alpha_max = num()?,
            "limit_margin" => o.graph.limits.margin = num()?,
            "dt" => cfg.dt = num()?,
            "max_time" => cfg.max_time = num()?,
            "horizon" => cfg.tracker.horizon = count()?,
            "recovery_radius" => cfg.tracker.recovery_radius = num()?,
            other => return Err(Error::Parse { line, msg: format!("unknown key `{other}`") }),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>, base: SimConfig) -> Result<SimConfig> {
    parse_config(&std::fs::read_to_string(path)?, base)
}

pub fn validate(cfg: &SimConfig) -> Result<()> {
    cfg.planner.validate()?;
    let w = &cfg.planner.optimizer.graph.weights;
    if [w.time, w.capsize, w.kinematic, w.limit].iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidParam("weights must be non-negative".into()));
    }
    let l = &cfg.planner.optimizer.graph.limits;
    if [l.v_max, l.omega_max, l.a_max, l.alpha_max].iter().any(|v| *v <= 0.0) || l.margin < 0.0 {
        return Err(Error::InvalidParam("limits must be positive".into()));
    }
    if !(cfg.dt > 0.0 && cfg.dt <= 0.1) {
        return Err(Error::InvalidParam(format!("dt must lie in (0, 0.1], got {}", cfg.dt)));
    }
    if !(cfg.max_time > 0.0) || cfg.tracker.horizon == 0 {
        return Err(Error::InvalidParam("max_time and horizon must be positive".into()));
    }
    Ok(())
}

/// Waypoints as `x,y` lines. A leading `x,y` header and `#` comments are skipped.
pub fn parse_waypoints(text: &str) -> Result<Vec<Vec2>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() || (out.is_empty() && content.replace(' ', "") == "x,y") {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        let [x, y] = fields[..] else {
            return Err(Error::Parse { line, msg: format!("expected `x,y`, got `{content}`") });
        };
        let parse = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, msg: format!("`{v}` is not a finite number") })
        };
        out.push(Vec2::new(parse(x)?, parse(y)?));
    }
    if out.is_empty() {
        return Err(Error::Input("waypoint file has no points".into()));
    }
    Ok(out)
}

pub fn load_waypoints(path: impl AsRef<Path>) -> Result<Vec<Vec2>> {
    parse_waypoints(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let c = parse_config("# tuning\ngamma_theta = 80\n\neta=0.3 # looser\nn_iter = 6\n", SimConfig::default()).unwrap();
        assert_eq!(c.planner.optimizer.graph.weights.capsize, 80.0);
        assert_eq!(c.planner.goal_tolerance, 0.3);
        assert_eq!(c.planner.optimizer.rounds, 6);
        assert_eq!(c.dt, SimConfig::default().dt);
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse_config("eta = 0.2\nbogus = 1\n", SimConfig::default()).unwrap_err();
        assert_eq!(e, Error::Parse { line: 2, msg: "unknown key `bogus`".into() });
        assert!(matches!(parse_config("eta\n", SimConfig::default()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("n_iter = 1.5\n", SimConfig::default()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("dt = 0.5\n", SimConfig::default()), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn waypoints() {
        let w = parse_waypoints("x,y\n0, 1\n# skip\n2.5,-1\n").unwrap();
        assert_eq!(w, vec![Vec2::new(0.0, 1.0), Vec2::new(2.5, -1.0)]);
        assert!(matches!(parse_waypoints("1,2\n3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_waypoints("1,nan\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_waypoints("x,y\n").is_err());
    }
}
