//! Navigation metrics, benchmark tables and CSV/SVG emitters.

use crate::gnf::query_field;
use crate::lift::{lift_state, roll_pitch, State2D};
use crate::optimizer::Trajectory;
use crate::par::{map_range, Execution};
use crate::scenario::Scenario;
use crate::sim::{run_navigation, NavMode, RunLog, SimConfig, Verdict};
use crate::stability::{OrientationCase, OrientationRaster, OrientationSet};
use crate::terrain::GridMap;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavMetrics {
    /// Peak |roll| plus peak |pitch|, radians.
    pub upsilon: f64,
    /// Simulated time of the final tick, seconds.
    pub time: f64,
    pub verdict: Verdict,
}

pub fn compute_metrics(log: &RunLog) -> Result<NavMetrics> {
    if log.rows.is_empty() {
        return Err(Error::Input("run log is empty".into()));
    }
    let roll = log.rows.iter().map(|r| r.roll.abs()).fold(0.0, f64::max);
    let pitch = log.rows.iter().map(|r| r.pitch.abs()).fold(0.0, f64::max);
    Ok(NavMetrics { upsilon: roll + pitch, time: log.final_time(), verdict: log.verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cap,
    Baseline,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Cap => "CAP",
            Method::Baseline => "Straight-line",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub method: Method,
    pub start: State2D,
    pub metrics: Option<NavMetrics>,
    pub all_stable: bool,
    pub log: RunLog,
}

impl TrialResult {
    pub fn succeeded(&self) -> bool {
        self.metrics.is_some_and(|m| m.verdict == Verdict::Goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some(Summary { mean, sd: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: Method,
    pub trials: usize,
    pub goals: usize,
    pub upsilon: Option<Summary>,
    pub time: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub scene: String,
    pub seed: u64,
    pub trials: Vec<TrialResult>,
    pub rows: Vec<TableRow>,
}

/// Start pose for trial `k`: a few centimeters and degrees of seeded jitter.
pub fn jittered_start(base: &State2D, seed: u64, trial: usize) -> State2D {
    if trial == 0 {
        return *base;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    State2D::new(
        base.x + rng.gen_range(-0.05..0.05),
        base.y + rng.gen_range(-0.05..0.05),
        base.theta + rng.gen_range(-2f64..2.0).to_radians(),
    )
}

/// Runs both methods on `trials` jittered starts. Non-goal runs are excluded from the means.
pub fn bench(scene: &Scenario, trials: usize, seed: u64, cfg: &SimConfig, exec: Execution) -> BenchReport {
    let methods = [Method::Cap, Method::Baseline];
    let results = map_range(exec, trials * methods.len(), |k| {
        let (trial, method) = (k / methods.len(), methods[k % methods.len()]);
        let start = jittered_start(&scene.start, seed, trial);
        let mode = match method {
            Method::Cap => NavMode::TargetOnly,
            Method::Baseline => NavMode::Baseline,
        };
        let log = run_navigation(&scene.map, &scene.geom, &start, scene.goal, cfg, &mode);
        TrialResult { trial, method, start, metrics: compute_metrics(&log).ok(), all_stable: log.all_stable(), log }
    });
    let rows = methods
        .iter()
        .map(|&m| {
            let runs: Vec<&TrialResult> = results.iter().filter(|r| r.method == m).collect();
            let ok: Vec<NavMetrics> = runs.iter().filter(|r| r.succeeded()).filter_map(|r| r.metrics).collect();
            TableRow {
                method: m,
                trials: runs.len(),
                goals: ok.len(),
                upsilon: summarize(&ok.iter().map(|v| v.upsilon).collect::<Vec<_>>()),
                time: summarize(&ok.iter().map(|v| v.time).collect::<Vec<_>>()),
            }
        })
        .collect();
    BenchReport { scene: scene.name.clone(), seed, trials: results, rows }
}

pub const BENCH_HEADER: &str = "method,trials,goals,upsilon_mean_rad,upsilon_sd_rad,time_mean_s,time_sd_s";

fn cells(s: Option<Summary>) -> [String; 2] {
    match s {
        Some(s) => [format!("{:.3}", s.mean), format!("{:.3}", s.sd)],
        None => ["Fail".into(), "Fail".into()],
    }
}

pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in &report.rows {
        let [um, us] = cells(r.upsilon);
        let [tm, ts] = cells(r.time);
        writeln!(out, "{},{},{},{um},{us},{tm},{ts}", r.method.label(), r.trials, r.goals).unwrap();
    }
    out
}

pub fn bench_text(report: &BenchReport) -> String {
    let fmt = |s: Option<Summary>| s.map_or("Fail".to_string(), |s| format!("{:.3} ± {:.3}", s.mean, s.sd));
    let mut out = format!("scene: {}  seed: {}\n", report.scene, report.seed);
    writeln!(out, "{:<14} {:>7} {:>18} {:>18}", "method", "goals", "Υ [rad]", "T [s]").unwrap();
    for r in &report.rows {
        let goals = format!("{}/{}", r.goals, r.trials);
        writeln!(out, "{:<14} {:>7} {:>18} {:>18}", r.method.label(), goals, fmt(r.upsilon), fmt(r.time)).unwrap();
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory, map: &GridMap) -> String {
    let mut out = String::from("index,x,y,theta,dT,z,roll,pitch\n");
    for (k, s) in traj.states().iter().enumerate() {
        let dt = traj.dts().get(k).copied().unwrap_or(0.0);
        let (z, roll, pitch) = match lift_state(map, s) {
            Ok(p) => {
                let a = roll_pitch(&p);
                (p.position.z, a.roll, a.pitch)
            }
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        writeln!(out, "{k},{},{},{},{dt},{z},{roll},{pitch}", s.x, s.y, s.theta).unwrap();
    }
    out
}

pub fn runlog_csv(log: &RunLog) -> String {
    let mut out = String::from("t,x,y,theta,z,roll,pitch,v,omega,traj_id,verdict\n");
    let last = log.rows.len().saturating_sub(1);
    for (k, r) in log.rows.iter().enumerate() {
        let verdict = if k == last { log.verdict.tag() } else { "" };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{verdict}",
            r.t, r.pose.x, r.pose.y, r.pose.theta, r.z, r.roll, r.pitch, r.v, r.omega, r.traj_id
        )
        .unwrap();
    }
    out
}

fn interval_text(set: &OrientationSet) -> String {
    set.intervals().iter().map(|(lo, hi)| format!("{lo:.6}:{hi:.6}")).collect::<Vec<_>>().join(";")
}

pub fn analyze_csv(map: &GridMap, raster: &OrientationRaster) -> String {
    let mut out = String::from("i,j,x,y,case,projection_length,gradient_azimuth,traversable_rad,intervals\n");
    for j in 0..raster.height {
        for i in 0..raster.width {
            if let Some(s) = raster.get(i, j) {
                let c = map.center(i, j);
                writeln!(
                    out,
                    "{i},{j},{},{},{},{},{},{},{}",
                    c.x,
                    c.y,
                    s.case.tag(),
                    s.projection_length,
                    s.gradient_azimuth,
                    s.measure(),
                    interval_text(s)
                )
                .unwrap();
            }
        }
    }
    out
}

/// Field samples on a regular lattice with spacing `step` over the queryable region.
pub fn field_dump_csv(map: &GridMap, step: f64, exec: Execution) -> Result<String> {
    if !(step > 0.0) {
        return Err(Error::InvalidParam("field-dump step must be positive".into()));
    }
    let (lo, hi) = crate::optimizer::queryable_bounds(map);
    let nx = ((hi.x - lo.x) / step).floor() as usize + 1;
    let ny = ((hi.y - lo.y) / step).floor() as usize + 1;
    let rows = map_range(exec, nx * ny, |k| {
        let (x, y) = (lo.x + (k % nx) as f64 * step, lo.y + (k / nx) as f64 * step);
        query_field(map, x, y).map(|v| format!("{x},{y},{},{},{},{}\n", v.z, v.n.x, v.n.y, v.n.z))
    });
    let mut out = String::from("x,y,z,nx,ny,nz\n");
    for r in rows {
        out.push_str(&r?);
    }
    Ok(out)
}

fn case_color(c: OrientationCase) -> &'static str {
    match c {
        OrientationCase::AllFree => "#4caf50",
        OrientationCase::TwoArcsWide => "#cddc39",
        OrientationCase::TwoArcsNarrow => "#ff9800",
        OrientationCase::Blocked => "#e53935",
    }
}

struct Canvas {
    scale: f64,
    x0: f64,
    y1: f64,
    w: f64,
    h: f64,
}

impl Canvas {
    fn new(map: &GridMap, px_per_m: f64) -> Self {
        let (lo, hi) = map.bounds();
        Self { scale: px_per_m, x0: lo.x, y1: hi.y, w: (hi.x - lo.x) * px_per_m, h: (hi.y - lo.y) * px_per_m }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x0) * self.scale, (self.y1 - y) * self.scale)
    }

    fn open(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.1} {:.1}\">\n",
            self.w, self.h, self.w, self.h
        )
    }
}

/// Traversability raster: every `stride`-th interior cell gets a pie of its safe headings.
pub fn raster_svg(map: &GridMap, raster: &OrientationRaster, stride: usize) -> String {
    let cv = Canvas::new(map, 60.0);
    let mut out = cv.open();
    let r = map.resolution();
    for j in 0..raster.height {
        for i in 0..raster.width {
            if let Some(s) = raster.get(i, j) {
                let c = map.center(i, j);
                let (x, y) = cv.px(c.x - 0.5 * r, c.y + 0.5 * r);
                writeln!(
                    out,
                    "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\" fill-opacity=\"0.55\"/>",
                    r * cv.scale,
                    r * cv.scale,
                    case_color(s.case)
                )
                .unwrap();
            }
        }
    }
    let stride = stride.max(1);
    let radius = 0.45 * stride as f64 * r * cv.scale;
    for j in (1..raster.height).step_by(stride) {
        for i in (1..raster.width).step_by(stride) {
            let Some(s) = raster.get(i, j) else { continue };
            let c = map.center(i, j);
            let (cx, cy) = cv.px(c.x, c.y);
            if s.case == OrientationCase::AllFree {
                writeln!(out, "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"{radius:.1}\" fill=\"#1b5e20\" fill-opacity=\"0.7\"/>").unwrap();
                continue;
            }
            for a in &s.arcs {
                let (lo, hi) = a.bounds();
                let (w0, w1) = (s.world(lo), s.world(hi));
                let sweep = crate::angle::wrap(w1 - w0).rem_euclid(2.0 * std::f64::consts::PI);
                let (x0, y0) = (cx + radius * w0.cos(), cy - radius * w0.sin());
                let (x1, y1) = (cx + radius * w1.cos(), cy - radius * w1.sin());
                let large = if sweep > std::f64::consts::PI { 1 } else { 0 };
                writeln!(
                    out,
                    "<path d=\"M{cx:.1},{cy:.1} L{x0:.1},{y0:.1} A{radius:.1},{radius:.1} 0 {large} 0 {x1:.1},{y1:.1} Z\" fill=\"#1b5e20\" fill-opacity=\"0.7\"/>"
                )
                .unwrap();
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

fn hillshade(map: &GridMap, cv: &Canvas, out: &mut String) {
    let r = map.resolution();
    let light = crate::Vec3::new(-1.0, 1.0, 1.5).normalize();
    for j in 0..map.height() {
        for i in 0..map.width() {
            let shade = map.normal(i, j).dot(&light).clamp(0.0, 1.0);
            let g = (40.0 + 215.0 * shade) as u8;
            let c = map.center(i, j);
            let (x, y) = cv.px(c.x - 0.5 * r, c.y + 0.5 * r);
            writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"rgb({g},{g},{g})\"/>",
                r * cv.scale + 0.2,
                r * cv.scale + 0.2
            )
            .unwrap();
        }
    }
}

fn polyline(cv: &Canvas, pts: impl Iterator<Item = (f64, f64)>, color: &str, width: f64) -> String {
    let p: Vec<String> = pts
        .map(|(x, y)| {
            let (a, b) = cv.px(x, y);
            format!("{a:.1},{b:.1}")
        })
        .collect();
    format!("<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n", p.join(" "))
}

/// Planned trajectories (thin) and, if given, the driven path (thick) over a hillshade.
pub fn trajectory_svg(map: &GridMap, plans: &[Trajectory], driven: Option<&RunLog>) -> String {
    let cv = Canvas::new(map, 60.0);
    let mut out = cv.open();
    hillshade(map, &cv, &mut out);
    for t in plans {
        out.push_str(&polyline(&cv, t.states().iter().map(|s| (s.x, s.y)), "#1e88e5", 1.5));
    }
    if let Some(log) = driven {
        out.push_str(&polyline(&cv, log.rows.iter().map(|r| (r.pose.x, r.pose.y)), "#d81b60", 3.0));
    }
    out.push_str("</svg>\n");
    out
}

/// Roll and pitch against time.
pub fn attitude_svg(log: &RunLog) -> String {
    let (w, h, pad) = (800.0, 300.0, 40.0);
    let t_end = log.final_time().max(1e-9);
    let peak = log.rows.iter().map(|r| r.roll.abs().max(r.pitch.abs())).fold(0.1, f64::max);
    let px = |t: f64, a: f64| (pad + (w - 2.0 * pad) * t / t_end, h / 2.0 - (h / 2.0 - pad) * a / peak);
    let mut out = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    writeln!(out, "<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999\"/>", h / 2.0, w - pad, h / 2.0).unwrap();
    for (name, color, f) in [("roll", "#1e88e5", 0usize), ("pitch", "#d81b60", 1)] {
        let pts: Vec<String> = log
            .rows
            .iter()
            .map(|r| {
                let (x, y) = px(r.t, if f == 0 { r.roll } else { r.pitch });
                format!("{x:.1},{y:.1}")
            })
            .collect();
        writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", pts.join(" ")).unwrap();
        writeln!(out, "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-size=\"14\">{name}</text>", pad + 60.0 * f as f64, pad * 0.6).unwrap();
    }
    writeln!(out, "<text x=\"{}\" y=\"{}\" font-size=\"12\">±{peak:.2} rad, {t_end:.1} s</text>", w - 200.0, pad * 0.6).unwrap();
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LogRow;

    fn log_with(peaks: &[(f64, f64)]) -> RunLog {
        let rows = peaks
            .iter()
            .enumerate()
            .map(|(k, &(roll, pitch))| LogRow {
                t: 0.05 * k as f64,
                pose: State2D::default(),
                z: 0.0,
                roll,
                pitch,
                v: 0.0,
                omega: 0.0,
                traj_id: 0,
                stable: true,
            })
            .collect();
        RunLog { rows, verdict: Verdict::Goal, message: None, blocking_cells: vec![], trajectories: vec![] }
    }

    #[test]
    fn metrics_arithmetic() {
        let m = compute_metrics(&log_with(&[(0.0, 0.0), (0.0, 0.0)])).unwrap();
        assert_eq!(m.upsilon, 0.0);
        let m = compute_metrics(&log_with(&[(0.1, -0.45), (-0.3, 0.2), (0.0, 0.0)])).unwrap();
        assert!((m.upsilon - 0.75).abs() < 1e-12);
        assert!((m.time - 0.1).abs() < 1e-12);
        assert!(compute_metrics(&log_with(&[])).is_err());
    }

    #[test]
    fn summary_stats() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 1.0).abs() < 1e-12);
        assert!(summarize(&[]).is_none());
        assert_eq!(summarize(&[4.0]).unwrap().sd, 0.0);
    }

    #[test]
    fn jitter_is_seeded() {
        let b = State2D::new(1.0, 2.0, 0.3);
        assert_eq!(jittered_start(&b, 7, 0), b);
        assert_eq!(jittered_start(&b, 7, 3), jittered_start(&b, 7, 3));
        assert_ne!(jittered_start(&b, 7, 3), jittered_start(&b, 8, 3));
        assert!(jittered_start(&b, 7, 2).distance(&b) < 0.08);
    }

    #[test]
    fn fail_cells() {
        let rep = BenchReport {
            scene: "x".into(),
            seed: 0,
            trials: vec![],
            rows: vec![TableRow { method: Method::Baseline, trials: 5, goals: 0, upsilon: None, time: None }],
        };
        assert_eq!(bench_csv(&rep), format!("{BENCH_HEADER}\nStraight-line,5,0,Fail,Fail,Fail,Fail\n"));
        assert!(bench_text(&rep).contains("Fail"));
    }

    #[test]
    fn runlog_marks_final_row() {
        let csv = runlog_csv(&log_with(&[(0.0, 0.0), (0.1, 0.1)]));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(','));
        assert!(lines[2].ends_with(",goal"));
    }
}
