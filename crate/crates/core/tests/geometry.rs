use capsize::gnf::{query_field, query_field_detailed};
use capsize::lift::{lift_on_normal, lift_state, roll_pitch, State2D};
use capsize::stability::{
    classify_map, contact_points, orientation_at, stability_at, traversable_orientation, OrientationCase,
};
use capsize::terrain::{generate_terrain, parse_map, write_map, Axis, GridMap, MapShape, RobotGeometry, TerrainKind};
use capsize::{Error, Vec2, Vec3};
use proptest::prelude::*;
use std::f64::consts::PI;

fn incline(angle_deg: f64) -> GridMap {
    generate_terrain(&TerrainKind::Incline { angle_deg, axis: Axis::X }, &MapShape::default(), 0).unwrap()
}

fn rough(seed: u64) -> GridMap {
    let kind = TerrainKind::SmoothRandom { amplitude: 1.0, wavelength: 2.0, max_slope_deg: 50.0, modes: 8 };
    generate_terrain(&kind, &MapShape { cols: 40, rows: 40, resolution: 0.1, origin: Vec2::new(-1.95, -1.95) }, seed).unwrap()
}

fn normal_at_slope(alpha: f64, azimuth: f64) -> Vec3 {
    Vec3::new(-alpha.sin() * azimuth.cos(), -alpha.sin() * azimuth.sin(), alpha.cos())
}

#[test]
fn map_text_roundtrip_is_exact() {
    let map = rough(4);
    let back = parse_map(&write_map(&map)).unwrap();
    assert_eq!(back.elevations(), map.elevations());
    assert_eq!((back.width(), back.height(), back.resolution(), back.origin()), (map.width(), map.height(), map.resolution(), map.origin()));
}

#[test]
fn generation_is_seeded() {
    assert_eq!(rough(7).elevations(), rough(7).elevations());
    assert_ne!(rough(7).elevations(), rough(8).elevations());
}

#[test]
fn malformed_maps_are_rejected() {
    for text in ["", "ncols 3\nnrows 3\n", "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n", "ncols x\n"] {
        assert!(parse_map(text).is_err(), "{text:?}");
    }
    assert!(GridMap::new(2, 5, 0.1, Vec2::zeros(), vec![0.0; 10]).is_err());
    assert!(GridMap::new(3, 3, 0.0, Vec2::zeros(), vec![0.0; 9]).is_err());
    assert!(GridMap::new(3, 3, 0.1, Vec2::zeros(), vec![f64::NAN; 9]).is_err());
}

#[test]
fn field_is_exact_at_cell_centers() {
    let map = rough(1);
    for j in 1..map.height() - 1 {
        for i in 1..map.width() - 1 {
            let c = map.center(i, j);
            let v = query_field(&map, c.x, c.y).unwrap();
            assert_eq!(v.z, map.z(i, j));
            assert_eq!(v.n, map.normal(i, j));
        }
    }
}

#[test]
fn queries_near_the_edge_need_a_larger_map() {
    let map = rough(1);
    let (lo, _) = map.bounds();
    assert!(matches!(query_field(&map, lo.x + 0.01, 0.0), Err(Error::Boundary { .. })));
    assert!(matches!(query_field(&map, 100.0, 0.0), Err(Error::OutOfBounds { .. })));
}

#[test]
fn plane_is_tracked_between_centers() {
    let map = incline(30.0);
    let v = query_field(&map, 0.123, -0.456).unwrap();
    assert!((v.z - 0.123 * 30f64.to_radians().tan()).abs() < 1e-3);
    assert!((v.n.z - 30f64.to_radians().cos()).abs() < 1e-12);
}

#[test]
fn incline_thresholds() {
    let geom = RobotGeometry::default();
    for (deg, case) in [(30.0, OrientationCase::AllFree), (60.0, OrientationCase::Blocked)] {
        let raster = classify_map(&incline(deg), &geom);
        let interior = raster.cells.iter().flatten().count();
        assert_eq!(raster.count(case), interior, "{deg}°");
    }
    let partial = orientation_at(&incline(50.0), &geom, 0.0, 0.0).unwrap();
    assert!(matches!(partial.case, OrientationCase::TwoArcsWide | OrientationCase::TwoArcsNarrow));
}

#[test]
fn heading_across_a_steep_slope_tips_and_uphill_does_not() {
    let map = incline(50.0);
    let geom = RobotGeometry::default();
    assert!(stability_at(&map, &State2D::new(0.0, 0.0, 0.0), &geom).unwrap().stable);
    assert!(!stability_at(&map, &State2D::new(0.0, 0.0, PI / 2.0), &geom).unwrap().stable);
    let set = orientation_at(&map, &geom, 0.0, 0.0).unwrap();
    assert!(set.is_traversable(0.0) && !set.is_traversable(PI / 2.0));
}

#[test]
fn contacts_lie_on_the_ground_plane() {
    let map = incline(20.0);
    let s = State2D::new(0.3, -0.2, 0.7);
    let n = query_field(&map, s.x, s.y).unwrap().n;
    let c = contact_points(&map, &s, &RobotGeometry::default()).unwrap();
    for p in &c {
        assert!((p - c[0]).dot(&n).abs() < 1e-3);
    }
    let centroid = (c[0] + c[1] + c[2] + c[3]) / 4.0;
    assert!((centroid.xy() - s.position()).norm() < 1e-9);
}

#[test]
fn lifted_pose_sits_on_the_field() {
    let map = rough(2);
    let s = State2D::new(0.4, -0.3, 1.1);
    let p = lift_state(&map, &s).unwrap();
    let f = query_field(&map, s.x, s.y).unwrap();
    assert!((p.b_z() - f.n).norm() < 1e-12);
    assert_eq!(p.position, Vec3::new(s.x, s.y, f.z));
}

#[test]
fn uphill_heading_pitches_up() {
    let s = State2D::new(0.0, 0.0, 0.0);
    let p = lift_on_normal(&s, 0.0, &normal_at_slope(0.3, 0.0)).unwrap();
    let a = roll_pitch(&p);
    assert!((a.pitch - 0.3).abs() < 1e-12 && a.roll.abs() < 1e-12);
    let side = lift_on_normal(&State2D::new(0.0, 0.0, PI / 2.0), 0.0, &normal_at_slope(0.3, 0.0)).unwrap();
    let a = roll_pitch(&side);
    assert!((a.roll.abs() - 0.3).abs() < 1e-12 && a.pitch.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn blend_weights_sum_to_one(seed in 0u64..4, x in -1.4f64..1.4, y in -1.4f64..1.4) {
        let map = rough(seed);
        let (v, parts) = query_field_detailed(&map, x, y).unwrap();
        prop_assert!((parts.iter().map(|p| p.blend).sum::<f64>() - 1.0).abs() < 1e-12);
        for p in &parts {
            for s in p.weights.sum() {
                prop_assert!((s - 1.0).abs() < 1e-8);
            }
        }
        prop_assert!((v.n.norm() - 1.0).abs() < 1e-12 && v.n.z > 0.0);
    }

    #[test]
    fn field_is_continuous(seed in 0u64..4, x in -1.4f64..1.4, y in -1.4f64..1.4, dir in 0.0f64..std::f64::consts::TAU) {
        let map = rough(seed);
        let h = 1e-5;
        let a = query_field(&map, x, y).unwrap();
        let b = query_field(&map, x + h * dir.cos(), y + h * dir.sin()).unwrap();
        prop_assert!((a.z - b.z).abs() < 1e-3);
        prop_assert!((a.n - b.n).norm() < 1e-3);
    }

    #[test]
    fn arcs_are_disjoint_and_match_the_indicator(alpha in 0.0f64..1.4, azimuth in -3.1f64..3.1, rel in -PI..PI) {
        let set = traversable_orientation(&RobotGeometry::default(), &normal_at_slope(alpha, azimuth)).unwrap();
        let iv = set.intervals();
        prop_assert!(iv.iter().all(|(lo, hi)| lo < hi && *lo >= -PI - 1e-12 && *hi <= PI + 1e-12));
        prop_assert!(iv.windows(2).all(|w| w[0].1 <= w[1].0 + 1e-12));
        let inside = iv.iter().any(|(lo, hi)| *lo < rel && rel < *hi);
        let on_edge = set.boundary_distance(rel) < 1e-9;
        prop_assume!(!on_edge);
        prop_assert_eq!(inside, set.indicator(rel) > 0);
        prop_assert!(set.indicator(rel) <= 1);
        for a in &set.arcs {
            let (lo, hi) = a.bounds();
            prop_assert!((a.center - 0.5 * (lo + hi)).abs() < 1e-12);
        }
        prop_assert!((set.world(set.relative(azimuth + rel)) - capsize::angle::wrap(azimuth + rel)).abs() < 1e-9);
    }

    #[test]
    fn lift_is_orthonormal(alpha in 0.0f64..1.4, azimuth in -3.1f64..3.1, theta in -3.1f64..3.1) {
        let n = normal_at_slope(alpha, azimuth);
        let p = lift_on_normal(&State2D::new(0.0, 0.0, theta), 0.0, &n).unwrap();
        prop_assert!(p.orthonormality_residual() < 1e-9);
        prop_assert!((p.b_z() - n).norm() < 1e-12);
        prop_assert!((p.rotation.determinant() - 1.0).abs() < 1e-9);
        let bx = p.b_x();
        prop_assert!(capsize::angle::wrap(bx.y.atan2(bx.x) - theta).abs() < 1e-9);
    }
}
