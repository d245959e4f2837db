use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use histquake_bench::synthetic_scenario;
use histquake_core::geometry::build_rupture;
use histquake_core::okada::uz_rectangle;

fn okada(c: &mut Criterion) {
    c.bench_function("okada/point", |b| {
        b.iter(|| uz_rectangle(black_box(12e3), black_box(-4e3), 30e3, 0.21, 100e3, 50e3, 0.0, 5.0))
    });
    let (scenario, truth) = synthetic_scenario();
    let model = &scenario.model;
    let rects = build_rupture(&truth, &model.geometry, &model.scaling).unwrap();
    println!("truth rupture: {} rectangles", rects.len());
    c.bench_function("okada/deformation_grid", |b| b.iter(|| model.deformation(black_box(&truth)).unwrap()));
}

fn forward(c: &mut Criterion) {
    let (scenario, truth) = synthetic_scenario();
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    group.bench_function("wave_simulation", |b| b.iter(|| scenario.model.run(black_box(&truth)).unwrap()));
    group.bench_function("log_posterior", |b| b.iter(|| scenario.evaluate(black_box(&truth)).unwrap()));
    group.finish();
}

criterion_group!(benches, okada, forward);
criterion_main!(benches);
