use std::path::Path;
use std::process::{Command, Output};

fn capsize(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capsize"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_then_analyze_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&capsize(&["generate", "--kind", "incline", "--param", "angle=50", "--cols", "20", "--rows", "20", "--out", "m.asc"], d));
    let map = std::fs::read_to_string(d.join("m.asc")).unwrap();
    assert!(map.starts_with("ncols 20\nnrows 20\n"));

    ok(&capsize(&["analyze", "--map", "m.asc", "--out", "a.csv", "--svg", "a.svg"], d));
    let csv = std::fs::read_to_string(d.join("a.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("i,j,x,y,case"));
    assert!(lines.all(|l| l.contains("two_arcs_")), "a 50° incline is neither free nor blocked");
    assert!(std::fs::read_to_string(d.join("a.svg")).unwrap().starts_with("<svg"));

    let dump = ok(&capsize(&["field-dump", "--map", "m.asc", "--step", "0.3"], d));
    assert!(dump.lines().count() > 10);
}

#[test]
fn generate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--kind", "smooth_random", "--param", "max_slope=40", "--seed", "9", "--cols", "30", "--rows", "30"];
    let a = ok(&capsize(&args, dir.path()));
    let b = ok(&capsize(&args, dir.path()));
    assert_eq!(a, b);
}

#[test]
fn plan_on_flat_map() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&capsize(&["generate", "--kind", "flat", "--out", "flat.asc"], d));
    let traj = ok(&capsize(&["plan", "--map", "flat.asc", "--start", "-2,0,0", "--goal", "2,0"], d));
    let rows: Vec<Vec<f64>> =
        traj.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let (first, last) = (&rows[0], rows.last().unwrap());
    assert_eq!((first[1], first[2]), (-2.0, 0.0));
    assert_eq!((last[1], last[2]), (2.0, 0.0));
    assert!(rows.iter().all(|r| r[2].abs() < 1e-6 && r[6].abs() < 1e-9 && r[7].abs() < 1e-9));
}

#[test]
fn simulate_scene_with_config_and_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.cfg"), "# quick\nmax_time = 30\n").unwrap();
    let out = capsize(
        &["simulate", "--scene", "flat", "--config", "c.cfg", "--out", "log.csv", "--svg", "t.svg", "--attitude-svg", "att.svg"],
        d,
    );
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("verdict: goal"));
    let log = std::fs::read_to_string(d.join("log.csv")).unwrap();
    assert!(log.lines().last().unwrap().ends_with(",goal"));
    for f in ["t.svg", "att.svg"] {
        assert!(d.join(f).exists());
    }
}

#[test]
fn baseline_tips_on_the_hill() {
    let dir = tempfile::tempdir().unwrap();
    let out = capsize(&["simulate", "--scene", "hill", "--baseline"], dir.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("verdict: tip-over"));
}

#[test]
fn bench_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = ok(&capsize(&["bench", "--scene", "flat", "--trials", "2", "--out", "b.csv"], d));
    assert!(text.contains("CAP") && text.contains("Straight-line"));
    let csv = std::fs::read_to_string(d.join("b.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,trials,goals,upsilon_mean_rad,upsilon_sd_rad,time_mean_s,time_sd_s");
    assert!(csv.contains("CAP,2,2,"));
}

#[test]
fn input_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [(&[&str], &str); 5] = [
        (&["plan", "--scene", "flat", "--start", "1,2"], "--start needs 3"),
        (&["plan", "--map", "missing.asc", "--start", "0,0,0", "--goal", "1,0"], "reading map"),
        (&["simulate", "--scene", "nowhere"], "unknown scene"),
        (&["generate", "--kind", "hill", "--param", "bogus=1"], "unknown parameter"),
        (&["analyze", "--scene", "flat", "--geom", "0.7,-1,0.35"], "geometry"),
    ];
    for (args, needle) in cases {
        let out = capsize(args, d);
        assert!(!out.status.success(), "{args:?} should fail");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}
