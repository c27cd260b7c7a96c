use capsize::par::Execution;
use capsize::report::{bench, field_dump_csv};
use capsize::scenario::flat_scene;
use capsize::sim::SimConfig;
use capsize::stability::classify_map_with;
use capsize::terrain::{generate_terrain, MapShape, RobotGeometry, TerrainKind};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const EXECUTIONS: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn rough() -> capsize::terrain::GridMap {
    let kind = TerrainKind::SmoothRandom { amplitude: 1.0, wavelength: 3.0, max_slope_deg: 55.0, modes: 8 };
    generate_terrain(&kind, &MapShape::default(), 1).unwrap()
}

fn classify(c: &mut Criterion) {
    let map = rough();
    let geom = RobotGeometry::default();
    let mut g = c.benchmark_group("classify_map");
    for (name, exec) in EXECUTIONS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| classify_map_with(black_box(&map), &geom, exec)));
    }
    g.finish();
}

fn field_dump(c: &mut Criterion) {
    let map = rough();
    let mut g = c.benchmark_group("field_dump");
    for (name, exec) in EXECUTIONS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| field_dump_csv(black_box(&map), 0.1, exec).unwrap()));
    }
    g.finish();
}

fn trials(c: &mut Criterion) {
    let scene = flat_scene().unwrap();
    let cfg = SimConfig::default();
    let mut g = c.benchmark_group("bench_trials");
    g.sample_size(10);
    for (name, exec) in EXECUTIONS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| bench(black_box(&scene), 4, 42, &cfg, exec)));
    }
    g.finish();
}

criterion_group!(benches, classify, field_dump, trials);
criterion_main!(benches);
