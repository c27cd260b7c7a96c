//! Static tip-over analysis.
//!
//! Two routes answer "can the robot stand here facing θ?":
//!
//! - [`is_stable`] evaluates the stability pyramid built from actual contact points;
//!   the robot is stable iff every tip-over axis has a positive signed angle to gravity.
//! - [`traversable_orientation`] gives the closed-form set of safe headings from the
//!   ground normal alone, via the projection length `L = h·tan ξ` of the mass center.

use crate::angle::wrap;
use crate::gnf::query_field;
use crate::lift::{lift_state, State2D};
use crate::par::{map_range, Execution};
use crate::terrain::{fit_plane_normal, GridMap, RobotGeometry};
use crate::{Error, Result, Vec3};
use std::f64::consts::PI;

const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -1.0);

/// Contact polygon of four wheels plus the mass center.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPyramid {
    contacts: [Vec3; 4],
    mass_center: Vec3,
    normal: Vec3,
}

impl StabilityPyramid {
    /// Contacts must be ordered counterclockwise when viewed from the upward polygon normal.
    pub fn new(contacts: [Vec3; 4], mass_center: Vec3) -> Result<Self> {
        let normal = fit_plane_normal(&contacts)
            .ok_or_else(|| Error::DegenerateGeometry("contact points do not span a plane".into()))?;
        let pyr = Self { contacts, mass_center, normal };
        let edges = pyr.edges();
        if let Some(k) = edges.iter().position(|t| t.norm() <= 1e-6) {
            return Err(Error::DegenerateGeometry(format!("edge {k} is shorter than 1e-6 m")));
        }
        for k in 0..4 {
            let turn = edges[k].cross(&edges[(k + 1) % 4]).dot(&normal);
            if turn <= 0.0 {
                return Err(Error::DegenerateGeometry(
                    "contact polygon is not convex and counterclockwise".into(),
                ));
            }
        }
        Ok(pyr)
    }

    /// Places the mass center `com_height` above the polygon centroid along the fitted normal.
    pub fn from_contacts(contacts: [Vec3; 4], com_height: f64) -> Result<Self> {
        let normal = fit_plane_normal(&contacts)
            .ok_or_else(|| Error::DegenerateGeometry("contact points do not span a plane".into()))?;
        let centroid = contacts.iter().fold(Vec3::zeros(), |a, p| a + p) / 4.0;
        Self::new(contacts, centroid + normal * com_height)
    }

    pub fn contacts(&self) -> &[Vec3; 4] {
        &self.contacts
    }

    pub fn mass_center(&self) -> Vec3 {
        self.mass_center
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    /// `t_i = p_{i+1} − p_i`, closing with `t_4 = p_1 − p_4`.
    pub fn edges(&self) -> [Vec3; 4] {
        let p = &self.contacts;
        [p[1] - p[0], p[2] - p[1], p[3] - p[2], p[0] - p[3]]
    }

    /// Tip-over normals `l_i = (I − t̂ t̂ᵀ)(p_{i+1} − p_c)`.
    pub fn tip_axes(&self) -> [Vec3; 4] {
        let edges = self.edges();
        std::array::from_fn(|k| {
            let t = edges[k].normalize();
            let r = self.contacts[(k + 1) % 4] - self.mass_center;
            r - t * t.dot(&r)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Smallest signed angle between gravity and a tip-over normal, radians.
    pub min_angle: f64,
    pub angles: [f64; 4],
}

/// Stability-pyramid test.
///
/// Each axis contributes `ε_i·arccos(f̂_g·l̂_i)`, where `ε_i = +1` when gravity lies on
/// the polygon side of the tip-over normal (`(l̂_i × f̂_g)·t̂_i > 0` for counterclockwise
/// contacts) and `−1` otherwise, including the exactly aligned case.
pub fn is_stable(pyr: &StabilityPyramid) -> Result<StabilityVerdict> {
    let edges = pyr.edges();
    let axes = pyr.tip_axes();
    let mut angles = [0.0; 4];
    for k in 0..4 {
        let l = axes[k];
        if l.norm() < 1e-9 {
            return Err(Error::DegenerateGeometry(format!("tip-over normal {k} vanishes")));
        }
        let l = l.normalize();
        let t = edges[k].normalize();
        let side = l.cross(&GRAVITY).dot(&t);
        let sign = if side > 0.0 { 1.0 } else { -1.0 };
        angles[k] = sign * GRAVITY.dot(&l).clamp(-1.0, 1.0).acos();
    }
    let min_angle = angles.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(StabilityVerdict { stable: min_angle > 0.0, min_angle, angles })
}

/// Footprint corners on the terrain: front-right, front-left, rear-left, rear-right.
///
/// Corners are laid out in the tangent plane of the lifted pose, so the footprint keeps its
/// true size on slopes, and then dropped onto the surface.
pub fn contact_points(map: &GridMap, state: &State2D, geom: &RobotGeometry) -> Result<[Vec3; 4]> {
    let pose = lift_state(map, state)?;
    let (bx, by) = (pose.b_x(), pose.b_y());
    let (hl, hw) = (0.5 * geom.length, 0.5 * geom.width);
    let body = [(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)];
    let mut out = [Vec3::zeros(); 4];
    for (k, (fx, fy)) in body.into_iter().enumerate() {
        let c = pose.position + bx * fx + by * fy;
        let z = query_field(map, c.x, c.y)?.z;
        out[k] = Vec3::new(c.x, c.y, z);
    }
    Ok(out)
}

/// Pyramid test at a planar pose, using the terrain under the four wheels.
pub fn stability_at(map: &GridMap, state: &State2D, geom: &RobotGeometry) -> Result<StabilityVerdict> {
    let contacts = contact_points(map, state, geom)?;
    is_stable(&StabilityPyramid::from_contacts(contacts, geom.com_height)?)
}

/// `L = h·tan ξ`, with `ξ` the angle between gravity and the reversed ground normal.
pub fn projection_length(geom: &RobotGeometry, n: &Vec3) -> Result<f64> {
    let norm = n.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::DegenerateGeometry("normal has zero length".into()));
    }
    let cos_xi = GRAVITY.dot(&(-n / norm)).clamp(-1.0, 1.0);
    let xi = cos_xi.acos();
    if xi >= 0.5 * PI - 1e-12 {
        return Err(Error::InfiniteProjection(xi));
    }
    Ok(geom.com_height * xi.tan())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrientationCase {
    /// `L < w/2`: every heading is safe.
    AllFree,
    /// `w/2 ≤ L < l/2`: two arcs around the gradient and its reverse.
    TwoArcsWide,
    /// `l/2 ≤ L < √(w²+l²)/2`: four narrow arcs flanking the gradient axis.
    TwoArcsNarrow,
    /// `L ≥ √(w²+l²)/2`: no safe heading.
    Blocked,
}

impl OrientationCase {
    pub fn tag(&self) -> &'static str {
        match self {
            OrientationCase::AllFree => "all_free",
            OrientationCase::TwoArcsWide => "two_arcs_wide",
            OrientationCase::TwoArcsNarrow => "two_arcs_narrow",
            OrientationCase::Blocked => "blocked",
        }
    }
}

/// An open arc of relative headings `|wrap(θ∇ − center)| < half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub center: f64,
    pub half_width: f64,
}

impl Arc {
    pub fn contains(&self, rel: f64) -> bool {
        wrap(rel - self.center).abs() < self.half_width
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// Traversable headings at one location.
///
/// Arcs are expressed in θ∇, the angle inside the contact plane between the body x axis and
/// the uphill gradient. A world heading `θ` at azimuth offset `δ = θ − gradient_azimuth`
/// maps to `θ∇ = atan2(sin δ · cos α, cos δ)` on a slope of angle `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationSet {
    pub case: OrientationCase,
    pub projection_length: f64,
    /// World azimuth of the horizontal uphill direction.
    pub gradient_azimuth: f64,
    /// `cos α`, the vertical component of the unit ground normal.
    pub cos_slope: f64,
    /// `[θ_r]` for the wide case, `[θ_r1, θ_r2]` for the narrow case, empty otherwise.
    pub boundary_angles: Vec<f64>,
    pub arcs: Vec<Arc>,
}

impl OrientationSet {
    /// θ∇ for a world heading.
    pub fn relative(&self, heading: f64) -> f64 {
        let d = heading - self.gradient_azimuth;
        (d.sin() * self.cos_slope).atan2(d.cos())
    }

    /// World heading for a θ∇.
    pub fn world(&self, rel: f64) -> f64 {
        wrap(self.gradient_azimuth + rel.sin().atan2(rel.cos() * self.cos_slope))
    }

    /// Number of arcs containing θ∇; positive iff the heading is traversable.
    pub fn indicator(&self, rel: f64) -> u32 {
        match self.case {
            OrientationCase::AllFree => 1,
            OrientationCase::Blocked => 0,
            _ => self.arcs.iter().filter(|a| a.contains(rel)).count() as u32,
        }
    }

    pub fn is_traversable(&self, heading: f64) -> bool {
        self.indicator(self.relative(heading)) > 0
    }

    pub fn is_blocked(&self) -> bool {
        self.case == OrientationCase::Blocked
    }

    /// Disjoint θ∇ intervals inside (−π, π], wrap-around arcs split at ±π.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        if self.case == OrientationCase::AllFree {
            return vec![(-PI, PI)];
        }
        let mut out = Vec::new();
        for a in &self.arcs {
            let (lo, hi) = a.bounds();
            if hi > PI {
                out.push((lo, PI));
                out.push((-PI, hi - 2.0 * PI));
            } else if lo < -PI {
                out.push((lo + 2.0 * PI, PI));
                out.push((-PI, hi));
            } else {
                out.push((lo, hi));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Total traversable angle, radians.
    pub fn measure(&self) -> f64 {
        match self.case {
            OrientationCase::AllFree => 2.0 * PI,
            _ => self.arcs.iter().map(|a| 2.0 * a.half_width).sum(),
        }
    }

    /// Angular distance from θ∇ to the nearest arc endpoint (infinite when there are none).
    pub fn boundary_distance(&self, rel: f64) -> f64 {
        match self.case {
            OrientationCase::AllFree => f64::INFINITY,
            _ => self
                .arcs
                .iter()
                .flat_map(|a| {
                    let (lo, hi) = a.bounds();
                    [wrap(rel - lo).abs(), wrap(rel - hi).abs()]
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Arc whose range center θ_c is nearest to the heading's θ∇.
    ///
    /// Ties (within 1e-9 rad) go to the arc whose world center is closest to `preferred`.
    /// `None` for the all-free and blocked cases.
    pub fn nearest_arc(&self, heading: f64, preferred: Option<f64>) -> Option<Arc> {
        if matches!(self.case, OrientationCase::AllFree | OrientationCase::Blocked) {
            return None;
        }
        let rel = self.relative(heading);
        let mut best: Option<(f64, Arc)> = None;
        for a in &self.arcs {
            let d = wrap(rel - a.center).abs();
            best = match best {
                None => Some((d, *a)),
                Some((bd, _)) if d < bd - 1e-9 => Some((d, *a)),
                Some((bd, b)) if (d - bd).abs() <= 1e-9 => {
                    let pick = match preferred {
                        Some(p) if wrap(self.world(a.center) - p).abs() < wrap(self.world(b.center) - p).abs() => *a,
                        _ => b,
                    };
                    Some((bd.min(d), pick))
                }
                keep => keep,
            };
        }
        best.map(|(_, a)| a)
    }

    /// World heading of the nearest range center, see [`OrientationSet::nearest_arc`].
    pub fn nearest_center(&self, heading: f64, preferred: Option<f64>) -> Option<f64> {
        self.nearest_arc(heading, preferred).map(|a| self.world(a.center))
    }
}

/// Closed-form traversable-orientation set for a ground normal.
pub fn traversable_orientation(geom: &RobotGeometry, n: &Vec3) -> Result<OrientationSet> {
    if n.z <= 0.0 {
        return Err(Error::DegenerateGeometry("ground normal must point upward".into()));
    }
    let projection_length = match projection_length(geom, n) {
        Ok(l) => l,
        Err(Error::InfiniteProjection(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let l = projection_length;
    let gradient_azimuth = if n.x == 0.0 && n.y == 0.0 { 0.0 } else { (-n.y).atan2(-n.x) };
    let half_w = 0.5 * geom.width;
    let half_l = 0.5 * geom.length;
    let (case, boundary_angles, arcs) = if l < half_w {
        (OrientationCase::AllFree, vec![], vec![Arc { center: 0.0, half_width: PI }])
    } else if l < half_l {
        let r = (half_w / l).asin();
        (
            OrientationCase::TwoArcsWide,
            vec![r],
            vec![Arc { center: 0.0, half_width: r }, Arc { center: PI, half_width: r }],
        )
    } else if l < geom.half_diagonal() {
        let r1 = (half_w / l).asin();
        let r2 = (half_l / l).acos();
        let c = 0.5 * (r1 + r2);
        let hw = 0.5 * (r1 - r2);
        (
            OrientationCase::TwoArcsNarrow,
            vec![r1, r2],
            [c, -c, PI - c, c - PI].iter().map(|&center| Arc { center, half_width: hw }).collect(),
        )
    } else {
        (OrientationCase::Blocked, vec![], vec![])
    };
    let cos_slope = n.z / n.norm();
    Ok(OrientationSet { case, projection_length, gradient_azimuth, cos_slope, boundary_angles, arcs })
}

/// Orientation set from the field normal at `(x, y)`.
pub fn orientation_at(map: &GridMap, geom: &RobotGeometry, x: f64, y: f64) -> Result<OrientationSet> {
    let v = query_field(map, x, y)?;
    traversable_orientation(geom, &v.n)
}

/// Orientation sets for every interior cell; border cells are `None`.
#[derive(Debug, Clone)]
pub struct OrientationRaster {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Option<OrientationSet>>,
}

impl OrientationRaster {
    pub fn get(&self, i: usize, j: usize) -> Option<&OrientationSet> {
        self.cells.get(j * self.width + i).and_then(|c| c.as_ref())
    }

    pub fn count(&self, case: OrientationCase) -> usize {
        self.cells.iter().flatten().filter(|s| s.case == case).count()
    }
}

pub fn classify_map(map: &GridMap, geom: &RobotGeometry) -> OrientationRaster {
    classify_map_with(map, geom, Execution::available())
}

pub fn classify_map_with(map: &GridMap, geom: &RobotGeometry, exec: Execution) -> OrientationRaster {
    let (w, h) = (map.width(), map.height());
    let cells = map_range(exec, w * h, |k| {
        let (i, j) = (k % w, k / w);
        if !map.is_interior(i, j) {
            return None;
        }
        traversable_orientation(geom, &map.normal(i, j)).ok()
    });
    OrientationRaster { width: w, height: h, cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{generate_terrain, Axis, MapShape, TerrainKind};
    use crate::Vec2;

    const GEOM: RobotGeometry = RobotGeometry { width: 0.7, length: 0.93, com_height: 0.35 };

    fn slope_normal(deg: f64, azimuth: f64) -> Vec3 {
        // plane rising toward `azimuth`
        let a = deg.to_radians();
        Vec3::new(-a.sin() * azimuth.cos(), -a.sin() * azimuth.sin(), a.cos())
    }

    fn normal_for_length(l: f64) -> Vec3 {
        slope_normal((l / GEOM.com_height).atan().to_degrees(), 0.0)
    }

    /// Rectangle on a plane tilted by `deg` about the body x axis (roll).
    fn rolled_pyramid(deg: f64) -> StabilityPyramid {
        let a = deg.to_radians();
        let (hl, hw) = (0.465, 0.35);
        let lateral = Vec3::new(0.0, a.cos(), a.sin());
        let fwd = Vec3::x();
        let pts = [(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)].map(|(x, y)| fwd * x + lateral * y);
        StabilityPyramid::from_contacts(pts, 0.35).unwrap()
    }

    /// Brute-force oracle: project the mass center along gravity onto the contact plane
    /// and test containment in the rectangle.
    fn gravity_projection_inside(pyr: &StabilityPyramid) -> bool {
        let n = pyr.normal();
        let pc = pyr.mass_center();
        let p0 = pyr.contacts()[0];
        let t = (pc - p0).dot(&n) / GRAVITY.dot(&n);
        let og = pc - GRAVITY * t;
        let e = pyr.edges();
        (0..4).all(|k| e[k].cross(&(og - pyr.contacts()[k])).dot(&n) > 0.0)
    }

    #[test]
    fn flat_pyramid_min_angle() {
        let v = rolled_pyramid(0.0);
        let s = is_stable(&v).unwrap();
        assert!(s.stable);
        assert!((s.min_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-6);
        assert!(gravity_projection_inside(&v));
    }

    #[test]
    fn roll_threshold() {
        let s = is_stable(&rolled_pyramid(45.0)).unwrap();
        assert!(s.min_angle.abs() < 1e-9, "{}", s.min_angle);
        assert!(!s.stable || s.min_angle < 1e-9);
        let s = is_stable(&rolled_pyramid(50.0)).unwrap();
        assert!(!s.stable);
        assert!(s.min_angle < 0.0);
        assert!(!gravity_projection_inside(&rolled_pyramid(50.0)));
    }

    #[test]
    fn closed_form_agrees_with_projection_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let deg = rng.gen_range(0.0..70.0);
            let az = rng.gen_range(-PI..PI);
            let yaw = rng.gen_range(-PI..PI);
            let n = slope_normal(deg, az);
            let fwd0 = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
            let left = n.cross(&fwd0).normalize();
            let fwd = left.cross(&n);
            let pts = [(0.465, -0.35), (0.465, 0.35), (-0.465, 0.35), (-0.465, -0.35)]
                .map(|(x, y)| fwd * x + left * y);
            let pyr = StabilityPyramid::from_contacts(pts, 0.35).unwrap();
            let s = is_stable(&pyr).unwrap();
            if s.min_angle.abs() > 1e-6 {
                assert_eq!(s.stable, gravity_projection_inside(&pyr));
            }
        }
    }

    #[test]
    fn pyramid_validation() {
        let sq = [Vec3::new(1.0, -1.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(-1.0, 1.0, 0.0), Vec3::new(-1.0, -1.0, 0.0)];
        assert!(StabilityPyramid::new(sq, Vec3::new(0.0, 0.0, 1.0)).is_ok());
        let mut cw = sq;
        cw.reverse();
        assert!(StabilityPyramid::new(cw, Vec3::new(0.0, 0.0, 1.0)).is_err());
        let dup = [sq[0], sq[0], sq[2], sq[3]];
        assert!(StabilityPyramid::new(dup, Vec3::new(0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn degenerate_tip_axis() {
        let sq = [Vec3::new(1.0, -1.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(-1.0, 1.0, 0.0), Vec3::new(-1.0, -1.0, 0.0)];
        let pyr = StabilityPyramid::new(sq, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(matches!(is_stable(&pyr), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn projection_lengths() {
        assert_eq!(projection_length(&GEOM, &Vec3::z()).unwrap(), 0.0);
        let l = projection_length(&GEOM, &slope_normal(45.0, 0.3)).unwrap();
        assert!((l - 0.35).abs() < 1e-12);
        let l = projection_length(&GEOM, &slope_normal(58.97, 0.0)).unwrap();
        assert!((l - 0.582).abs() < 1e-3);
        assert!(matches!(projection_length(&GEOM, &Vec3::x()), Err(Error::InfiniteProjection(_))));
    }

    #[test]
    fn orientation_cases() {
        let flat = traversable_orientation(&GEOM, &Vec3::z()).unwrap();
        assert_eq!(flat.case, OrientationCase::AllFree);
        assert_eq!(flat.intervals(), vec![(-PI, PI)]);
        assert!(flat.is_traversable(PI) && flat.is_traversable(-2.0));

        let wide = traversable_orientation(&GEOM, &normal_for_length(0.4)).unwrap();
        assert_eq!(wide.case, OrientationCase::TwoArcsWide);
        assert!((wide.boundary_angles[0] - 1.0654358165107394).abs() < 1e-9);
        assert!(wide.indicator(1.0) > 0 && wide.indicator(1.1) == 0);
        assert!(wide.indicator(PI) > 0 && wide.indicator(PI - 1.0) > 0);

        let narrow = traversable_orientation(&GEOM, &normal_for_length(0.5)).unwrap();
        assert_eq!(narrow.case, OrientationCase::TwoArcsNarrow);
        assert!((narrow.boundary_angles[0] - 0.775397496610753).abs() < 1e-9);
        assert!((narrow.boundary_angles[1] - 0.3763834823177281).abs() < 1e-9);
        for (rel, ok) in [(0.5, true), (-0.5, true), (0.2, false), (0.9, false), (PI - 0.5, true), (-PI + 0.5, true), (PI, false)] {
            assert_eq!(narrow.indicator(rel) > 0, ok, "rel {rel}");
        }
        let blocked = traversable_orientation(&GEOM, &slope_normal(60.0, 1.0)).unwrap();
        assert_eq!(blocked.case, OrientationCase::Blocked);
        assert!(blocked.intervals().is_empty());
    }

    /// Literal piecewise Heaviside form of the traversability function.
    fn literal_h(geom: &RobotGeometry, l: f64, rel: f64) -> f64 {
        let h = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };
        let a = rel.abs();
        let (hw, hl) = (0.5 * geom.width, 0.5 * geom.length);
        if l < hw {
            h(PI - a)
        } else if l < hl {
            let r = (hw / l).asin();
            h(r - a) + h(a - (PI - r)) * h(PI - a)
        } else if l < geom.half_diagonal() {
            let r1 = (hw / l).asin();
            let r2 = (hl / l).acos();
            h(r1 - a) * h(a - r2) + h(a - (PI - r1)) * h((PI - r2) - a)
        } else {
            0.0
        }
    }

    #[test]
    fn indicator_matches_literal_form() {
        for k in 0..120 {
            let l = 0.005 * k as f64;
            let set = traversable_orientation(&GEOM, &normal_for_length(l)).unwrap();
            for d in -179..180 {
                let rel = (d as f64 + 0.5).to_radians();
                assert_eq!(set.indicator(rel) > 0, literal_h(&GEOM, set.projection_length, rel) > 0.0, "L={l} rel={rel}");
            }
        }
    }

    #[test]
    fn case_boundaries() {
        let eps = 1e-6;
        let at = |l: f64| traversable_orientation(&GEOM, &normal_for_length(l)).unwrap().case;
        assert_eq!(at(0.35 - eps), OrientationCase::AllFree);
        assert_eq!(at(0.35 + eps), OrientationCase::TwoArcsWide);
        assert_eq!(at(0.465 - eps), OrientationCase::TwoArcsWide);
        assert_eq!(at(0.465 + eps), OrientationCase::TwoArcsNarrow);
        assert_eq!(at(GEOM.half_diagonal() - eps), OrientationCase::TwoArcsNarrow);
        assert_eq!(at(GEOM.half_diagonal() + eps), OrientationCase::Blocked);
    }

    #[test]
    fn measure_is_monotone_in_length() {
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let set = traversable_orientation(&GEOM, &normal_for_length(0.004 * k as f64)).unwrap();
            assert!(set.measure() <= last + 1e-12);
            last = set.measure();
        }
    }

    #[test]
    fn symmetric_intervals() {
        for l in [0.4, 0.5, 0.55] {
            let set = traversable_orientation(&GEOM, &normal_for_length(l)).unwrap();
            for d in 0..360 {
                let rel = d as f64 * 0.0174 + 0.003;
                let v = set.indicator(rel) > 0;
                assert_eq!(v, set.indicator(-rel) > 0);
                assert_eq!(v, set.indicator(wrap(rel + PI)) > 0);
            }
        }
    }

    #[test]
    fn nearest_center_and_gradient() {
        let set = traversable_orientation(&GEOM, &slope_normal(50.0, 0.7)).unwrap();
        assert!((set.gradient_azimuth - 0.7).abs() < 1e-12);
        let c = set.nearest_center(0.7 + 0.2, None).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
        let c = set.nearest_center(0.7 + 3.0, None).unwrap();
        assert!((wrap(c - 0.7 - PI)).abs() < 1e-12);
        // exactly between the two centers: hysteresis decides
        let c = set.nearest_center(0.7 + PI / 2.0, Some(0.7 + PI)).unwrap();
        assert!((wrap(c - 0.7 - PI)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_pyramid_on_inclines() {
        let shape = MapShape { cols: 41, rows: 41, resolution: 0.1, origin: Vec2::new(-2.0, -2.0) };
        for deg in [30.0, 47.0, 50.0, 55.0, 57.0, 60.0] {
            let m = generate_terrain(&TerrainKind::Incline { angle_deg: deg, axis: Axis::Y }, &shape, 0).unwrap();
            let set = orientation_at(&m, &GEOM, 0.1, 0.2).unwrap();
            for d in 0..360 {
                let th = (d as f64 + 0.25).to_radians();
                if set.boundary_distance(set.relative(th)) < 0.5f64.to_radians() {
                    continue;
                }
                let s = stability_at(&m, &State2D::new(0.1, 0.2, th), &GEOM).unwrap();
                assert_eq!(s.stable, set.is_traversable(th), "slope {deg} heading {d}");
            }
        }
    }

    #[test]
    fn world_relative_roundtrip() {
        let set = traversable_orientation(&GEOM, &slope_normal(50.0, -2.0)).unwrap();
        for k in -30..30 {
            let th = k as f64 * 0.1;
            assert!(wrap(set.world(set.relative(th)) - th).abs() < 1e-12);
        }
        assert!(set.relative(-2.0).abs() < 1e-12);
        assert!((set.relative(-2.0 + PI / 2.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn contact_points_flat() {
        let m = generate_terrain(&TerrainKind::Flat { height: 0.0 }, &MapShape::default(), 0).unwrap();
        let p = contact_points(&m, &State2D::new(0.0, 0.0, 0.0), &GEOM).unwrap();
        let expect = [(0.465, -0.35), (0.465, 0.35), (-0.465, 0.35), (-0.465, -0.35)];
        for (c, (x, y)) in p.iter().zip(expect) {
            assert!((c - Vec3::new(x, y, 0.0)).norm() < 1e-12);
        }
        let p = contact_points(&m, &State2D::new(0.0, 0.0, PI / 2.0), &GEOM).unwrap();
        let expect = [(0.35, 0.465), (-0.35, 0.465), (-0.35, -0.465), (0.35, -0.465)];
        for (c, (x, y)) in p.iter().zip(expect) {
            assert!((c - Vec3::new(x, y, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn contact_points_incline() {
        let shape = MapShape { cols: 41, rows: 41, resolution: 0.1, origin: Vec2::new(-2.0, -2.0) };
        let m = generate_terrain(&TerrainKind::Incline { angle_deg: 45.0, axis: Axis::X }, &shape, 0).unwrap();
        let p = contact_points(&m, &State2D::new(0.0, 0.0, 0.0), &GEOM).unwrap();
        for c in p {
            assert!((c.z - c.x).abs() < 1e-2, "{c:?}");
        }
        assert!(((p[0] - p[3]).norm() - GEOM.length).abs() < 1e-3);
        assert!(((p[0] - p[1]).norm() - GEOM.width).abs() < 1e-3);
    }

    #[test]
    fn incline_roll_threshold_on_map() {
        let shape = MapShape { cols: 41, rows: 41, resolution: 0.1, origin: Vec2::new(-2.0, -2.0) };
        for (deg, stable) in [(44.0, true), (46.0, false)] {
            let m = generate_terrain(&TerrainKind::Incline { angle_deg: deg, axis: Axis::X }, &shape, 0).unwrap();
            let v = stability_at(&m, &State2D::new(0.0, 0.0, PI / 2.0), &GEOM).unwrap();
            assert_eq!(v.stable, stable, "{deg}");
        }
    }

    #[test]
    fn classification() {
        let shape = MapShape { cols: 30, rows: 30, resolution: 0.1, origin: Vec2::new(-1.5, -1.5) };
        let flat = generate_terrain(&TerrainKind::Flat { height: 1.0 }, &shape, 0).unwrap();
        let r = classify_map(&flat, &GEOM);
        assert_eq!(r.count(OrientationCase::AllFree), 28 * 28);
        let steep = generate_terrain(&TerrainKind::Incline { angle_deg: 60.0, axis: Axis::Y }, &shape, 0).unwrap();
        let r = classify_map(&steep, &GEOM);
        assert_eq!(r.count(OrientationCase::Blocked), 28 * 28);
        assert!(r.get(0, 0).is_none());
        let seq = classify_map_with(&steep, &GEOM, Execution::Sequential);
        assert_eq!(seq.cells, r.cells);
    }

    #[test]
    fn gentle_hill_has_no_blocked_cells() {
        // amplitude/sigma chosen so the steepest slope is 30 degrees.
        let sigma = 1.0;
        let amp = 30f64.to_radians().tan() * sigma / (-0.5f64).exp();
        let m = generate_terrain(
            &TerrainKind::GaussianHill { amplitude: amp, sigma, center: Vec2::zeros() },
            &MapShape::default(),
            0,
        )
        .unwrap();
        let r = classify_map(&m, &GEOM);
        assert_eq!(r.count(OrientationCase::Blocked), 0);
        assert_eq!(r.count(OrientationCase::TwoArcsNarrow), 0);
    }

    #[test]
    fn flat_stability_is_yaw_invariant() {
        let m = generate_terrain(&TerrainKind::Flat { height: 0.0 }, &MapShape::default(), 0).unwrap();
        for k in 0..16 {
            let s = stability_at(&m, &State2D::new(0.1, -0.2, k as f64 * 0.4), &GEOM).unwrap();
            assert!((s.min_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-9);
        }
    }
}
