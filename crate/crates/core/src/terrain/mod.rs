//! 2.5D elevation grids.
//!
//! Cell `(i, j)` has its center at `origin + (i, j) * resolution`; `i` indexes columns
//! along +x and `j` rows along +y. Elevations are stored row-major from `j = 0`.

mod generate;
mod io;

pub use generate::{generate_terrain, Axis, MapShape, TerrainKind};
pub use io::{load_map, parse_map, save_map, write_map};

use crate::{Error, Result, Vec2, Vec3};
use nalgebra::Matrix3;

/// Robot footprint and mass-center height, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotGeometry {
    /// Track width `w` (lateral extent of the contact rectangle).
    pub width: f64,
    /// Wheelbase `l` (longitudinal extent of the contact rectangle).
    pub length: f64,
    /// Height `h` of the mass center above the contact plane.
    pub com_height: f64,
}

impl RobotGeometry {
    pub fn new(width: f64, length: f64, com_height: f64) -> Result<Self> {
        let ok = [width, length, com_height].iter().all(|v| v.is_finite())
            && width > 0.0
            && width <= length
            && com_height > 0.0;
        if !ok {
            return Err(Error::InvalidParam(format!(
                "robot geometry needs 0 < w <= l and h > 0, got w={width} l={length} h={com_height}"
            )));
        }
        Ok(Self { width, length, com_height })
    }

    /// Half the footprint diagonal, the projection length beyond which nothing is traversable.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.width.hypot(self.length)
    }

    /// The same robot with its support rectangle scaled by `1 - shrink`.
    pub fn shrunk(&self, shrink: f64) -> Self {
        let s = (1.0 - shrink).clamp(1e-3, 1.0);
        Self { width: self.width * s, length: self.length * s, com_height: self.com_height }
    }
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self { width: 0.7, length: 0.93, com_height: 0.35 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    resolution: f64,
    origin: Vec2,
    width: usize,
    height: usize,
    elevation: Vec<f64>,
    normals: Vec<Vec3>,
}

impl GridMap {
    /// Builds a map and estimates a unit normal for every cell.
    ///
    /// Interior cells use the full 3×3 neighbourhood; border cells use the part of the
    /// neighbourhood that lies inside the map.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        elevation: Vec<f64>,
    ) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidParam(format!("resolution must be > 0, got {resolution}")));
        }
        if width < 3 || height < 3 {
            return Err(Error::InvalidParam(format!(
                "map must be at least 3x3 cells, got {width}x{height}"
            )));
        }
        if elevation.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "expected {} elevations, got {}",
                width * height,
                elevation.len()
            )));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("origin must be finite".into()));
        }
        if let Some(k) = elevation.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidParam(format!("elevation {k} is not finite")));
        }
        let mut map = Self { resolution, origin, width, height, elevation, normals: Vec::new() };
        let mut normals = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                normals.push(map.window_normal(i, j)?);
            }
        }
        map.normals = normals;
        Ok(map)
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut elevation = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                let x = origin.x + i as f64 * resolution;
                let y = origin.y + j as f64 * resolution;
                elevation.push(f(x, y));
            }
        }
        Self::new(width, height, resolution, origin, elevation)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevation
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + i as f64 * self.resolution,
            self.origin.y + j as f64 * self.resolution,
        )
    }

    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.elevation[self.index(i, j)]
    }

    /// Stored unit normal of cell `(i, j)`.
    pub fn normal(&self, i: usize, j: usize) -> Vec3 {
        self.normals[self.index(i, j)]
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i + 1 < self.width && j + 1 < self.height
    }

    /// World extent covered by the cells, `(min, max)` corners.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let half = 0.5 * self.resolution;
        let min = self.origin - Vec2::new(half, half);
        let max = self.origin
            + Vec2::new(
                (self.width - 1) as f64 * self.resolution + half,
                (self.height - 1) as f64 * self.resolution + half,
            );
        (min, max)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (min, max) = self.bounds();
        x >= min.x && x <= max.x && y >= min.y && y <= max.y
    }

    /// Containing cell of a world position.
    pub fn cell_at(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if !(x.is_finite() && y.is_finite()) || !self.contains(x, y) {
            return Err(Error::OutOfBounds { x, y });
        }
        let fi = ((x - self.origin.x) / self.resolution).round();
        let fj = ((y - self.origin.y) / self.resolution).round();
        let i = (fi.max(0.0) as usize).min(self.width - 1);
        let j = (fj.max(0.0) as usize).min(self.height - 1);
        Ok((i, j))
    }

    /// Nearest-cell elevation lookup.
    pub fn elevation_at(&self, x: f64, y: f64) -> Result<f64> {
        let (i, j) = self.cell_at(x, y)?;
        Ok(self.z(i, j))
    }

    /// Plane-fit normal over the 3×3 neighbourhood of an interior cell.
    pub fn cell_normal(&self, i: usize, j: usize) -> Result<Vec3> {
        if !self.is_interior(i, j) {
            return Err(Error::CellOutOfRange { i: i as isize, j: j as isize });
        }
        self.window_normal(i, j)
    }

    fn window_normal(&self, i: usize, j: usize) -> Result<Vec3> {
        let mut pts = [Vec3::zeros(); 9];
        let mut n = 0;
        let (i0, i1) = (i.saturating_sub(1), (i + 1).min(self.width - 1));
        let (j0, j1) = (j.saturating_sub(1), (j + 1).min(self.height - 1));
        for jj in j0..=j1 {
            for ii in i0..=i1 {
                let c = self.center(ii, jj);
                pts[n] = Vec3::new(c.x, c.y, self.z(ii, jj));
                n += 1;
            }
        }
        fit_plane_normal(&pts[..n]).ok_or(Error::DegenerateSurface { i, j })
    }
}

/// Unit normal of the least-squares plane through `points`, oriented with positive z.
///
/// Points are centered on their mean; the normal is the right singular vector belonging
/// to the smallest singular value. Returns `None` when the points span fewer than two
/// dimensions or the plane is vertical.
pub fn fit_plane_normal(points: &[Vec3]) -> Option<Vec3> {
    if points.len() < 3 {
        return None;
    }
    let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        scatter += d * d.transpose();
    }
    let svd = scatter.svd(true, false);
    let u = svd.u?;
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let (smallest, middle, largest) = (order[0], order[1], order[2]);
    if !(s[largest] > 0.0) || s[middle] <= 1e-12 * s[largest] {
        return None;
    }
    let mut n: Vec3 = u.column(smallest).into_owned();
    let norm = n.norm();
    if !norm.is_finite() || norm == 0.0 {
        return None;
    }
    n /= norm;
    if n.z < 0.0 {
        n = -n;
    }
    if n.z <= 1e-12 {
        return None;
    }
    Some(n)
}
