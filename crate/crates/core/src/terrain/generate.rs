use super::GridMap;
use crate::{Error, Result, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" | "0" => Ok(Axis::X),
            "y" | "1" => Ok(Axis::Y),
            other => Err(Error::InvalidParam(format!("unknown axis '{other}'"))),
        }
    }
}

/// Raster layout shared by every generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapShape {
    pub cols: usize,
    pub rows: usize,
    pub resolution: f64,
    pub origin: Vec2,
}

impl Default for MapShape {
    fn default() -> Self {
        Self { cols: 100, rows: 100, resolution: 0.1, origin: Vec2::new(-4.95, -4.95) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerrainKind {
    Flat { height: f64 },
    /// Plane rising at `angle_deg` along `axis`, zero at the world origin.
    Incline { angle_deg: f64, axis: Axis },
    GaussianHill { amplitude: f64, sigma: f64, center: Vec2 },
    /// Ramp band of slope `angle_deg` and horizontal `width`, centered on `center` along `axis`;
    /// flat on both sides.
    Ridge { angle_deg: f64, width: f64, center: f64, axis: Axis },
    /// Sum of random plane waves with wavelengths of at least `wavelength`, rescaled so
    /// that no adjacent-cell slope exceeds `max_slope_deg`.
    SmoothRandom { amplitude: f64, wavelength: f64, max_slope_deg: f64, modes: usize },
}

impl TerrainKind {
    /// Builds a kind from its name and `key=value` parameters.
    ///
    /// Unknown keys are rejected; missing keys take defaults.
    pub fn from_params(name: &str, params: &[(String, String)]) -> Result<Self> {
        let get = |key: &str, default: f64| -> Result<f64> {
            match params.iter().find(|(k, _)| k == key) {
                Some((_, v)) => v
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParam(format!("{key}={v} is not a number"))),
                None => Ok(default),
            }
        };
        let axis = || -> Result<Axis> {
            match params.iter().find(|(k, _)| k == "axis") {
                Some((_, v)) => v.parse(),
                None => Ok(Axis::X),
            }
        };
        let allowed: &[&str] = match name {
            "flat" => &["height"],
            "incline" => &["angle", "axis"],
            "gaussian_hill" | "hill" => &["amplitude", "sigma", "cx", "cy"],
            "ridge" => &["angle", "width", "center", "axis"],
            "smooth_random" | "random" => &["amplitude", "wavelength", "max_slope", "modes"],
            other => return Err(Error::InvalidParam(format!("unknown terrain kind '{other}'"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParam(format!("unknown parameter '{k}' for {name}")));
        }
        let kind = match name {
            "flat" => TerrainKind::Flat { height: get("height", 0.0)? },
            "incline" => TerrainKind::Incline { angle_deg: get("angle", 20.0)?, axis: axis()? },
            "gaussian_hill" | "hill" => TerrainKind::GaussianHill {
                amplitude: get("amplitude", 1.0)?,
                sigma: get("sigma", 1.0)?,
                center: Vec2::new(get("cx", 0.0)?, get("cy", 0.0)?),
            },
            "ridge" => TerrainKind::Ridge {
                angle_deg: get("angle", 50.0)?,
                width: get("width", 0.5)?,
                center: get("center", 0.0)?,
                axis: axis()?,
            },
            _ => {
                let modes = get("modes", 8.0)?;
                if modes < 1.0 || modes.fract() != 0.0 {
                    return Err(Error::InvalidParam(format!("modes must be a positive integer, got {modes}")));
                }
                TerrainKind::SmoothRandom {
                    amplitude: get("amplitude", 1.0)?,
                    wavelength: get("wavelength", 4.0)?,
                    max_slope_deg: get("max_slope", 30.0)?,
                    modes: modes as usize,
                }
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        match *self {
            TerrainKind::Flat { height } if !height.is_finite() => bad("flat height must be finite".into()),
            TerrainKind::Incline { angle_deg, .. } if !(0.0..80.0).contains(&angle_deg) => {
                bad(format!("incline angle must be in [0, 80) degrees, got {angle_deg}"))
            }
            TerrainKind::GaussianHill { amplitude, sigma, center }
                if !(amplitude.is_finite() && sigma > 0.0 && sigma.is_finite() && center.iter().all(|c| c.is_finite())) =>
            {
                bad("gaussian hill needs finite amplitude and sigma > 0".into())
            }
            TerrainKind::Ridge { angle_deg, width, center, .. }
                if !((0.0..80.0).contains(&angle_deg) && width > 0.0 && width.is_finite() && center.is_finite()) =>
            {
                bad("ridge needs angle in [0, 80) degrees and width > 0".into())
            }
            TerrainKind::SmoothRandom { amplitude, wavelength, max_slope_deg, modes }
                if !(amplitude >= 0.0
                    && amplitude.is_finite()
                    && wavelength > 0.0
                    && wavelength.is_finite()
                    && (0.0..80.0).contains(&max_slope_deg)
                    && modes >= 1) =>
            {
                bad("smooth_random needs amplitude >= 0, wavelength > 0, max_slope in [0, 80) and modes >= 1".into())
            }
            _ => Ok(()),
        }
    }
}

/// Generates a terrain raster. Output depends only on `(kind, shape, seed)`.
pub fn generate_terrain(kind: &TerrainKind, shape: &MapShape, seed: u64) -> Result<GridMap> {
    kind.validate()?;
    let MapShape { cols, rows, resolution, origin } = *shape;
    match *kind {
        TerrainKind::Flat { height } => GridMap::from_fn(cols, rows, resolution, origin, |_, _| height),
        TerrainKind::Incline { angle_deg, axis } => {
            let slope = angle_deg.to_radians().tan();
            GridMap::from_fn(cols, rows, resolution, origin, |x, y| match axis {
                Axis::X => slope * x,
                Axis::Y => slope * y,
            })
        }
        TerrainKind::GaussianHill { amplitude, sigma, center } => {
            let inv = 1.0 / (2.0 * sigma * sigma);
            GridMap::from_fn(cols, rows, resolution, origin, |x, y| {
                let r2 = (x - center.x).powi(2) + (y - center.y).powi(2);
                amplitude * (-r2 * inv).exp()
            })
        }
        TerrainKind::Ridge { angle_deg, width, center, axis } => {
            let slope = angle_deg.to_radians().tan();
            let start = center - 0.5 * width;
            GridMap::from_fn(cols, rows, resolution, origin, |x, y| {
                let u = match axis {
                    Axis::X => x,
                    Axis::Y => y,
                };
                slope * (u - start).clamp(0.0, width)
            })
        }
        TerrainKind::SmoothRandom { amplitude, wavelength, max_slope_deg, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k_max = TAU / wavelength;
            let waves: Vec<(f64, f64, f64, f64)> = (0..modes)
                .map(|_| {
                    let k = rng.gen_range(0.25 * k_max..=k_max);
                    let dir = rng.gen_range(0.0..TAU);
                    let phase = rng.gen_range(0.0..TAU);
                    let a = rng.gen_range(0.5..1.0);
                    (k * dir.cos(), k * dir.sin(), phase, a)
                })
                .collect();
            let norm: f64 = waves.iter().map(|w| w.3).sum();
            let raw = GridMap::from_fn(cols, rows, resolution, origin, |x, y| {
                waves.iter().map(|&(kx, ky, ph, a)| a * (kx * x + ky * y + ph).cos()).sum::<f64>()
                    * amplitude
                    / norm
            })?;
            let cap = max_slope_deg.to_radians().tan();
            let steepest = max_adjacent_slope(&raw);
            if steepest > cap {
                let scale = cap / steepest;
                let z = raw.elevations().iter().map(|z| z * scale).collect();
                GridMap::new(cols, rows, resolution, origin, z)
            } else {
                Ok(raw)
            }
        }
    }
}

/// Largest forward-difference gradient magnitude over the raster.
pub(crate) fn max_adjacent_slope(map: &GridMap) -> f64 {
    let r = map.resolution();
    let mut best: f64 = 0.0;
    for j in 0..map.height() - 1 {
        for i in 0..map.width() - 1 {
            let gx = (map.z(i + 1, j) - map.z(i, j)) / r;
            let gy = (map.z(i, j + 1) - map.z(i, j)) / r;
            best = best.max(gx.hypot(gy));
        }
    }
    best
}
