//! Preset scenes used by the benchmarks, the CLI and the tests.

use crate::lift::State2D;
use crate::terrain::{generate_terrain, GridMap, MapShape, RobotGeometry, TerrainKind};
use crate::{Result, Vec2};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub map: GridMap,
    pub geom: RobotGeometry,
    pub start: State2D,
    pub goal: Vec2,
}

/// Amplitude of a Gaussian hill whose steepest slope is `deg`.
pub fn hill_amplitude_for_slope(sigma: f64, deg: f64) -> f64 {
    deg.to_radians().tan() * sigma * 0.5f64.exp()
}

/// A hill with `max_slope_deg`; the straight start-goal line passes the flank at `offset`.
pub fn hill_scene(sigma: f64, max_slope_deg: f64, offset: f64) -> Result<Scenario> {
    let kind = TerrainKind::GaussianHill {
        amplitude: hill_amplitude_for_slope(sigma, max_slope_deg),
        sigma,
        center: Vec2::zeros(),
    };
    Ok(Scenario {
        name: "hill".into(),
        map: generate_terrain(&kind, &MapShape::default(), 0)?,
        geom: RobotGeometry::default(),
        start: State2D::new(-4.0, -offset, 0.0),
        goal: Vec2::new(4.0, -offset),
    })
}

/// Default comparison scene: 53° hill flank crossed sideways by the straight line.
pub fn default_hill() -> Result<Scenario> {
    hill_scene(1.0, 53.0, 1.0)
}

pub fn flat_scene() -> Result<Scenario> {
    Ok(Scenario {
        name: "flat".into(),
        map: generate_terrain(&TerrainKind::Flat { height: 0.0 }, &MapShape::default(), 0)?,
        geom: RobotGeometry::default(),
        start: State2D::new(-2.5, 0.0, 0.0),
        goal: Vec2::new(2.5, 0.0),
    })
}

pub fn by_name(name: &str) -> Result<Scenario> {
    match name {
        "hill" => default_hill(),
        "flat" => flat_scene(),
        other => Err(crate::Error::InvalidParam(format!("unknown scene `{other}` (expected hill or flat)"))),
    }
}
