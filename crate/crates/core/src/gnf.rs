//! Ground-normal field: continuous elevation and surface normal from a grid map.
//!
//! Each cell carries an embedding `v = [z, n_x, n_y, n_z]`. Around a query point `p`,
//! the 3×3 regression window of a cell is turned into nine estimation vectors by
//! linearly interpolating from the window center toward each neighbour by the
//! distance ratio `‖p − p_c‖ / ‖p_c^i − p_c‖` (clamped to `[0, 1]`). The estimation
//! vectors sit on the ring of radius `‖p − p_c‖` around the center, and an ordinary
//! Kriging system with a linear variogram weights them into a prediction for `p`.
//!
//! A query blends the window predictions of the four cells surrounding `p`
//! bilinearly, so the field is continuous across cell borders and reproduces the
//! stored values at cell centers.

use crate::terrain::GridMap;
use crate::{Error, Result, Vec2, Vec3};
use nalgebra::{SMatrix, SVector};

/// Neighbour offsets of a regression window; index 0 is the center cell.
pub const WINDOW_OFFSETS: [(isize, isize); 9] =
    [(0, 0), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Below this fraction of a cell, a query is treated as sitting on the cell center.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingVector {
    pub z: f64,
    pub n: Vec3,
}

impl EmbeddingVector {
    pub fn to_array(&self) -> [f64; 4] {
        [self.z, self.n.x, self.n.y, self.n.z]
    }

    /// Renormalises the normal part of a raw interpolated embedding.
    pub fn from_raw(v: [f64; 4]) -> Result<Self> {
        let n = Vec3::new(v[1], v[2], v[3]);
        let norm = n.norm();
        if !(norm.is_finite() && norm > 1e-12 && v[0].is_finite()) {
            return Err(Error::DegenerateGeometry(format!("interpolated normal {n:?} cannot be normalised")));
        }
        Ok(Self { z: v[0], n: n / norm })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionWindow {
    pub center: (usize, usize),
    pub vectors: [EmbeddingVector; 9],
    pub sites: [Vec2; 9],
    pub spacing: f64,
}

impl RegressionWindow {
    pub fn new(map: &GridMap, i: usize, j: usize) -> Result<Self> {
        if !map.is_interior(i, j) {
            return Err(Error::CellOutOfRange { i: i as isize, j: j as isize });
        }
        let mut vectors = [EmbeddingVector { z: 0.0, n: Vec3::z() }; 9];
        let mut sites = [Vec2::zeros(); 9];
        for (k, &(di, dj)) in WINDOW_OFFSETS.iter().enumerate() {
            let (ii, jj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
            vectors[k] = EmbeddingVector { z: map.z(ii, jj), n: map.normal(ii, jj) };
            sites[k] = map.center(ii, jj);
        }
        Ok(Self { center: (i, j), vectors, sites, spacing: map.resolution() })
    }

    fn reaches(&self, p: Vec2) -> bool {
        let d = p - self.sites[0];
        let lim = self.spacing * (1.0 + 1e-9);
        d.x.abs() <= lim && d.y.abs() <= lim
    }
}

/// The nine estimation vectors of a query point and the ring sites they represent.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSet {
    pub values: [[f64; 4]; 9],
    pub sites: [Vec2; 9],
    /// Distance of the query from the window center.
    pub radius: f64,
}

/// Distance-ratio estimation vectors for `p`.
///
/// `p` may lie anywhere within one cell spacing (per axis) of the window center, which
/// covers every point whose surrounding cell centers include this window.
pub fn estimate_vectors(window: &RegressionWindow, p: Vec2) -> Result<EstimationSet> {
    if !window.reaches(p) {
        return Err(Error::Domain { x: p.x, y: p.y });
    }
    let c = window.sites[0];
    let radius = (p - c).norm();
    let base = window.vectors[0].to_array();
    let mut values = [base; 9];
    let mut sites = [c; 9];
    for k in 1..9 {
        let arm = window.sites[k] - c;
        let ratio = (radius / arm.norm()).clamp(0.0, 1.0);
        let v = window.vectors[k].to_array();
        for d in 0..4 {
            values[k][d] = base[d] + ratio * (v[d] - base[d]);
        }
        sites[k] = c + arm * ratio;
    }
    Ok(EstimationSet { values, sites, radius })
}

/// Per-component Kriging weights: `lambda[i][k]` is the k-th diagonal entry of `Λ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingWeights {
    pub lambda: [[f64; 4]; 9],
    /// Lagrange multipliers, one per embedding component.
    pub phi: [f64; 4],
    /// Components that fell back to uniform weights because their window was constant.
    pub fallback: [bool; 4],
}

impl KrigingWeights {
    fn center_only() -> Self {
        let mut lambda = [[0.0; 4]; 9];
        lambda[0] = [1.0; 4];
        Self { lambda, phi: [0.0; 4], fallback: [false; 4] }
    }

    /// Diagonal of `Σ_i Λ_i`.
    pub fn sum(&self) -> [f64; 4] {
        let mut s = [0.0; 4];
        for l in &self.lambda {
            for k in 0..4 {
                s[k] += l[k];
            }
        }
        s
    }

    pub fn predict(&self, est: &EstimationSet) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (l, v) in self.lambda.iter().zip(&est.values) {
            for k in 0..4 {
                out[k] += l[k] * v[k];
            }
        }
        out
    }
}

/// Ordinary Kriging system on the ring sites with a unit linear variogram.
///
/// Distances are expressed in units of the ring radius. Weights are independent of the
/// variogram's slope; the per-component slopes fitted to the window only scale `Φ`.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    pub matrix: SMatrix<f64, 10, 10>,
    pub rhs: SVector<f64, 10>,
    /// Fitted linear-variogram slope per component.
    pub sill: [f64; 4],
    scale: f64,
}

impl KrigingSystem {
    pub fn build(est: &EstimationSet, p: Vec2) -> Self {
        let scale = if est.radius > 0.0 { 1.0 / est.radius } else { 1.0 };
        let mut matrix = SMatrix::<f64, 10, 10>::zeros();
        let mut rhs = SVector::<f64, 10>::zeros();
        for a in 0..9 {
            for b in 0..9 {
                matrix[(a, b)] = (est.sites[a] - est.sites[b]).norm() * scale;
            }
            matrix[(a, 9)] = 1.0;
            matrix[(9, a)] = 1.0;
            rhs[a] = (est.sites[a] - p).norm() * scale;
        }
        rhs[9] = 1.0;
        let mut sill = [0.0; 4];
        for (k, s) in sill.iter_mut().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for a in 0..9 {
                for b in (a + 1)..9 {
                    let d = (est.sites[a] - est.sites[b]).norm();
                    let g = 0.5 * (est.values[a][k] - est.values[b][k]).powi(2);
                    num += g * d;
                    den += d * d;
                }
            }
            *s = if den > 0.0 { num / den } else { 0.0 };
        }
        Self { matrix, rhs, sill, scale }
    }

    /// Largest residual `‖A·w − b‖` over the components that were actually solved.
    pub fn residual(&self, w: &KrigingWeights) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            if w.fallback[k] {
                continue;
            }
            let mut x = SVector::<f64, 10>::zeros();
            for i in 0..9 {
                x[i] = w.lambda[i][k];
            }
            // phi is stored in variogram units; the matrix uses the unit variogram
            x[9] = if self.sill[k] > 0.0 { w.phi[k] * self.scale / self.sill[k] } else { 0.0 };
            worst = worst.max((self.matrix * x - self.rhs).norm());
        }
        worst
    }
}

fn constant_component(est: &EstimationSet, k: usize) -> bool {
    let v0 = est.values[0][k];
    let tol = 1e-12 * (1.0 + v0.abs());
    est.values.iter().all(|v| (v[k] - v0).abs() <= tol)
}

fn solve_estimation(est: &EstimationSet, p: Vec2, spacing: f64) -> (KrigingWeights, Option<KrigingSystem>) {
    if est.radius <= SNAP * spacing {
        return (KrigingWeights::center_only(), None);
    }
    let system = KrigingSystem::build(est, p);
    let solution = system.matrix.lu().solve(&system.rhs).filter(|x| x.iter().all(|v| v.is_finite()));
    let mut w = KrigingWeights { lambda: [[0.0; 4]; 9], phi: [0.0; 4], fallback: [false; 4] };
    for k in 0..4 {
        match solution {
            Some(ref x) if !constant_component(est, k) && system.sill[k] > 0.0 => {
                for i in 0..9 {
                    w.lambda[i][k] = x[i];
                }
                w.phi[k] = x[9] * system.sill[k] / system.scale;
            }
            _ => {
                for i in 0..9 {
                    w.lambda[i][k] = 1.0 / 9.0;
                }
                w.fallback[k] = true;
            }
        }
    }
    (w, Some(system))
}

/// Solves the Kriging weights for `p` in `window`.
///
/// Constant components, and windows whose system cannot be factorised, get uniform
/// weights `I/9` and are flagged in [`KrigingWeights::fallback`].
pub fn solve_kriging(window: &RegressionWindow, p: Vec2) -> Result<KrigingWeights> {
    let est = estimate_vectors(window, p)?;
    Ok(solve_estimation(&est, p, window.spacing).0)
}

/// Kriging system of `window` at `p`, for residual checks. `None` at the window center.
pub fn kriging_system(window: &RegressionWindow, p: Vec2) -> Result<Option<KrigingSystem>> {
    let est = estimate_vectors(window, p)?;
    Ok(solve_estimation(&est, p, window.spacing).1)
}

/// Window prediction for `p`, before renormalisation.
pub fn predict_window(window: &RegressionWindow, p: Vec2) -> Result<[f64; 4]> {
    let est = estimate_vectors(window, p)?;
    let (w, _) = solve_estimation(&est, p, window.spacing);
    Ok(w.predict(&est))
}

/// One window's contribution to a field query.
#[derive(Debug, Clone)]
pub struct WindowContribution {
    pub center: (usize, usize),
    pub blend: f64,
    pub weights: KrigingWeights,
    pub prediction: [f64; 4],
}

/// The four surrounding cell centers of `p` and their bilinear blend weights.
fn surrounding(map: &GridMap, x: f64, y: f64) -> Result<Vec<((usize, usize), f64)>> {
    if !(x.is_finite() && y.is_finite()) || !map.contains(x, y) {
        return Err(Error::OutOfBounds { x, y });
    }
    let o = map.origin();
    let r = map.resolution();
    let split = |u: f64| {
        let f = u / r;
        let snapped = f.round();
        if (f - snapped).abs() < SNAP {
            (snapped, 0.0)
        } else {
            (f.floor(), f - f.floor())
        }
    };
    let (fi, tx) = split(x - o.x);
    let (fj, ty) = split(y - o.y);
    let mut out = Vec::with_capacity(4);
    for (di, wx) in [(0.0, 1.0 - tx), (1.0, tx)] {
        for (dj, wy) in [(0.0, 1.0 - ty), (1.0, ty)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let (ci, cj) = (fi + di, fj + dj);
            if ci < 1.0 || cj < 1.0 || ci > (map.width() - 2) as f64 || cj > (map.height() - 2) as f64 {
                return Err(Error::Boundary { x, y });
            }
            out.push(((ci as usize, cj as usize), w));
        }
    }
    Ok(out)
}

/// Field query with the per-window details exposed.
pub fn query_field_detailed(map: &GridMap, x: f64, y: f64) -> Result<(EmbeddingVector, Vec<WindowContribution>)> {
    let corners = surrounding(map, x, y)?;
    let p = Vec2::new(x, y);
    if let [((i, j), w)] = corners[..] {
        if w == 1.0 {
            let v = EmbeddingVector { z: map.z(i, j), n: map.normal(i, j) };
            let weights = KrigingWeights::center_only();
            return Ok((v, vec![WindowContribution { center: (i, j), blend: 1.0, weights, prediction: v.to_array() }]));
        }
    }
    let mut acc = [0.0; 4];
    let mut parts = Vec::with_capacity(corners.len());
    for ((i, j), blend) in corners {
        let window = RegressionWindow::new(map, i, j)?;
        let est = estimate_vectors(&window, p)?;
        let (weights, _) = solve_estimation(&est, p, window.spacing);
        let prediction = weights.predict(&est);
        for k in 0..4 {
            acc[k] += blend * prediction[k];
        }
        parts.push(WindowContribution { center: (i, j), blend, weights, prediction });
    }
    Ok((EmbeddingVector::from_raw(acc)?, parts))
}

/// Continuous elevation and unit normal at `(x, y)`.
///
/// The point must be at least one cell inside the map so that every surrounding window
/// is complete; otherwise a [`Error::Boundary`] asks for a larger map.
pub fn query_field(map: &GridMap, x: f64, y: f64) -> Result<EmbeddingVector> {
    let corners = surrounding(map, x, y)?;
    if let [((i, j), w)] = corners[..] {
        if w == 1.0 {
            return Ok(EmbeddingVector { z: map.z(i, j), n: map.normal(i, j) });
        }
    }
    let p = Vec2::new(x, y);
    let mut acc = [0.0; 4];
    for ((i, j), blend) in corners {
        let window = RegressionWindow::new(map, i, j)?;
        let pred = predict_window(&window, p)?;
        for k in 0..4 {
            acc[k] += blend * pred[k];
        }
    }
    EmbeddingVector::from_raw(acc)
}
