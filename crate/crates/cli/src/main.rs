use anyhow::{bail, Context, Result};
use capsize::config::{load_config, load_waypoints};
use capsize::lift::State2D;
use capsize::par::Execution;
use capsize::planner::{replan_step, replan_step_with_path, ReplanOutcome};
use capsize::report::{
    analyze_csv, attitude_svg, bench, bench_csv, bench_text, compute_metrics, field_dump_csv, raster_svg,
    runlog_csv, trajectory_csv, trajectory_svg,
};
use capsize::scenario::{by_name, Scenario};
use capsize::sim::{run_navigation, NavMode, SimConfig};
use capsize::stability::classify_map;
use capsize::terrain::{generate_terrain, load_map, save_map, MapShape, RobotGeometry, TerrainKind};
use capsize::Vec2;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

/// Capsizing-aware trajectory planning on 2.5D terrain.
///
/// Headings are radians, measured counter-clockwise from the +x axis.
/// Maps are ESRI ASCII grids.
#[derive(Parser)]
#[command(name = "capsize", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic terrain map.
    Generate(GenerateArgs),
    /// Classify every cell's traversable orientations.
    Analyze(AnalyzeArgs),
    /// Sample the continuous ground-normal field on a regular grid.
    FieldDump(FieldDumpArgs),
    /// Plan a trajectory from start to goal.
    Plan(RunArgs),
    /// Simulate a full navigation run with replanning.
    Simulate(SimulateArgs),
    /// Compare CAP against the straight-line baseline over jittered trials.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// flat, incline, hill, ridge or smooth_random.
    #[arg(long)]
    kind: String,
    /// Terrain parameter as key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long, default_value_t = 100)]
    cols: usize,
    #[arg(long, default_value_t = 100)]
    rows: usize,
    /// Cell size in meters.
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    /// ESRI ASCII grid map.
    #[arg(long, conflicts_with = "scene")]
    map: Option<PathBuf>,
    /// Built-in scene (hill or flat) supplying map, start and goal.
    #[arg(long)]
    scene: Option<String>,
    /// Robot width, length and mass-center height in meters.
    #[arg(long, value_name = "W,L,H")]
    geom: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG raster.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Draw every n-th cell in the SVG.
    #[arg(long, default_value_t = 2)]
    stride: usize,
}

#[derive(Args)]
struct FieldDumpArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Sample spacing in meters.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, value_name = "X,Y,THETA", allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
    goal: Option<String>,
    /// CSV of x,y waypoints used to initialize the first plan.
    #[arg(long)]
    waypoints: Option<PathBuf>,
    /// key = value overrides of the planner and simulator defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG of the trajectory.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Drive the straight-line baseline instead of CAP.
    #[arg(long, conflicts_with = "waypoints")]
    baseline: bool,
    /// Also write the roll/pitch time series as SVG.
    #[arg(long)]
    attitude_svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, value_name = "X,Y,THETA", allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
    goal: Option<String>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV table; the aligned text table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials one after another.
    #[arg(long)]
    sequential: bool,
}

fn numbers(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("{what} `{s}` is not a comma-separated list of numbers"))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        bail!("{what} needs {n} finite comma-separated values, got `{s}`");
    }
    Ok(v)
}

fn parse_state(s: &str) -> Result<State2D> {
    let v = numbers(s, 3, "--start")?;
    Ok(State2D::new(v[0], v[1], v[2]))
}

fn parse_point(s: &str) -> Result<Vec2> {
    let v = numbers(s, 2, "--goal")?;
    Ok(Vec2::new(v[0], v[1]))
}

fn geometry(args: &MapArgs) -> Result<Option<RobotGeometry>> {
    args.geom
        .as_deref()
        .map(|g| {
            let v = numbers(g, 3, "--geom")?;
            Ok(RobotGeometry::new(v[0], v[1], v[2])?)
        })
        .transpose()
}

fn load_sim_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => load_config(p, SimConfig::default()).with_context(|| format!("reading config {}", p.display())),
        None => Ok(SimConfig::default()),
    }
}

/// Map, geometry and endpoints from a scene, a map file, or both flags merged.
fn scenario(args: &MapArgs, start: Option<&str>, goal: Option<&str>, need_endpoints: bool) -> Result<Scenario> {
    let mut sc = match (&args.scene, &args.map) {
        (Some(name), _) => by_name(name)?,
        (None, Some(path)) => {
            let map = load_map(path).with_context(|| format!("reading map {}", path.display()))?;
            Scenario {
                name: path.file_stem().map_or("map".into(), |s| s.to_string_lossy().into_owned()),
                map,
                geom: RobotGeometry::default(),
                start: State2D::new(0.0, 0.0, 0.0),
                goal: Vec2::zeros(),
            }
        }
        (None, None) => bail!("either --map or --scene is required"),
    };
    if let Some(g) = geometry(args)? {
        sc.geom = g;
    }
    match (start, goal) {
        (Some(s), Some(g)) => {
            sc.start = parse_state(s)?;
            sc.goal = parse_point(g)?;
        }
        (None, None) if args.scene.is_some() || !need_endpoints => {}
        (Some(s), None) if args.scene.is_some() => sc.start = parse_state(s)?,
        (None, Some(g)) if args.scene.is_some() => sc.goal = parse_point(g)?,
        _ => bail!("--start and --goal are required with --map"),
    }
    Ok(sc)
}

fn map_only(args: &MapArgs) -> Result<Scenario> {
    scenario(args, None, None, false)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let params = a
        .params
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .with_context(|| format!("--param `{p}` is not key=value"))
        })
        .collect::<Result<Vec<_>>>()?;
    let kind = TerrainKind::from_params(&a.kind, &params)?;
    if a.cols < 3 || a.rows < 3 {
        bail!("maps need at least 3 columns and rows");
    }
    let shape = MapShape {
        cols: a.cols,
        rows: a.rows,
        resolution: a.resolution,
        origin: -Vec2::new(a.cols as f64 - 1.0, a.rows as f64 - 1.0) * (a.resolution / 2.0),
    };
    let map = generate_terrain(&kind, &shape, a.seed)?;
    match &a.out {
        Some(p) => save_map(&map, p).with_context(|| format!("writing {}", p.display())),
        None => emit(None, &capsize::terrain::write_map(&map)),
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let sc = map_only(&a.map)?;
    let raster = classify_map(&sc.map, &sc.geom);
    emit(a.out.as_deref(), &analyze_csv(&sc.map, &raster))?;
    if let Some(svg) = &a.svg {
        write_file(svg, &raster_svg(&sc.map, &raster, a.stride.max(1)))?;
    }
    Ok(())
}

fn field_dump(a: &FieldDumpArgs) -> Result<()> {
    let sc = map_only(&a.map)?;
    emit(a.out.as_deref(), &field_dump_csv(&sc.map, a.step, Execution::available())?)
}

fn goal_state(sc: &Scenario) -> State2D {
    let heading = (sc.goal.y - sc.start.y).atan2(sc.goal.x - sc.start.x);
    State2D::new(sc.goal.x, sc.goal.y, heading)
}

fn plan(a: &RunArgs) -> Result<()> {
    let sc = scenario(&a.map, a.start.as_deref(), a.goal.as_deref(), true)?;
    let cfg = load_sim_config(a.config.as_deref())?;
    let goal = goal_state(&sc);
    let out = match &a.waypoints {
        Some(p) => {
            let w = load_waypoints(p).with_context(|| format!("reading waypoints {}", p.display()))?;
            replan_step_with_path(None, &w, &sc.start, &goal, &sc.map, &sc.geom, &cfg.planner)
        }
        None => replan_step(None, &sc.start, &goal, &sc.map, &sc.geom, &cfg.planner),
    }?;
    let ReplanOutcome::Planned(report) = out else {
        eprintln!("start is already within the goal tolerance");
        return Ok(());
    };
    emit(a.out.as_deref(), &trajectory_csv(&report.trajectory, &sc.map))?;
    if let Some(svg) = &a.svg {
        write_file(svg, &trajectory_svg(&sc.map, std::slice::from_ref(&report.trajectory), None))?;
    }
    eprintln!(
        "planned {} states, T = {:.2} s, cost {:.4}, {} LM iterations, {} reseeds",
        report.trajectory.len(),
        report.trajectory.total_time(),
        report.cost,
        report.lm_iterations,
        report.reseeds
    );
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let r = &a.run;
    let sc = scenario(&r.map, r.start.as_deref(), r.goal.as_deref(), true)?;
    let cfg = load_sim_config(r.config.as_deref())?;
    let mode = match (&r.waypoints, a.baseline) {
        (_, true) => NavMode::Baseline,
        (Some(p), false) => {
            NavMode::Waypoints(load_waypoints(p).with_context(|| format!("reading waypoints {}", p.display()))?)
        }
        (None, false) => NavMode::TargetOnly,
    };
    let log = run_navigation(&sc.map, &sc.geom, &sc.start, sc.goal, &cfg, &mode);
    emit(r.out.as_deref(), &runlog_csv(&log))?;
    if let Some(svg) = &r.svg {
        write_file(svg, &trajectory_svg(&sc.map, &log.trajectories, Some(&log)))?;
    }
    if let Some(svg) = &a.attitude_svg {
        write_file(svg, &attitude_svg(&log))?;
    }
    let mut summary = format!("verdict: {}", log.verdict.tag());
    if let Ok(m) = compute_metrics(&log) {
        summary.push_str(&format!(", Υ = {:.3} rad, T = {:.2} s", m.upsilon, m.time));
    }
    if let Some(msg) = &log.message {
        summary.push_str(&format!(" ({msg})"));
    }
    if !log.blocking_cells.is_empty() {
        let cells: Vec<String> = log.blocking_cells.iter().map(|(i, j)| format!("({i},{j})")).collect();
        summary.push_str(&format!("; blocking cells {}", cells.join(" ")));
    }
    eprintln!("{summary}");
    Ok(())
}

fn run_bench(a: &BenchArgs) -> Result<()> {
    let sc = scenario(&a.map, a.start.as_deref(), a.goal.as_deref(), true)?;
    let cfg = load_sim_config(a.config.as_deref())?;
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let exec = if a.sequential { Execution::Sequential } else { Execution::available() };
    let report = bench(&sc, a.trials, a.seed, &cfg, exec);
    print!("{}", bench_text(&report));
    if let Some(p) = &a.out {
        write_file(p, &bench_csv(&report))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(&a),
        Command::Analyze(a) => analyze(&a),
        Command::FieldDump(a) => field_dump(&a),
        Command::Plan(a) => plan(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Bench(a) => run_bench(&a),
    }
}
