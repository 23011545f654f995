//! Sequential against parallel execution on the three data-parallel workloads:
//! phase classification over a grid, zero location in a window, and critical
//! graph tracing. On a single core the two should be close; the gap shows the
//! scheduling overhead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use p2atlas::airy::{Lambda, SeedWeights};
use p2atlas::exec::Exec;
use p2atlas::num::C64;
use p2atlas::phase::{build_atlas, AtlasOptions, QuarticQ};
use p2atlas::quaddiff::{critical_graph, TraceOptions};
use p2atlas::taufun::TauOptions;
use p2atlas::zerofind::{locate_zeros_with, LocateOptions, TauFn, Window};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn classify(c: &mut Criterion) {
    let atlas = build_atlas(&AtlasOptions::default(), Exec::default()).unwrap();
    let mut g = c.benchmark_group("classify_grid_200");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| atlas.classify_grid(C64::new(-4.0, -4.0), C64::new(4.0, 4.0), 200, 200, exec))
        });
    }
    g.finish();
}

fn zeros(c: &mut Criterion) {
    let f = TauFn { n: 3, weights: SeedWeights::new(Lambda::Infinity), opts: TauOptions::default() };
    let w = Window::square(C64::new(0.0, 0.0), 6.0);
    let mut g = c.benchmark_group("tau3_zeros");
    g.sample_size(10);
    for (name, exec) in MODES {
        let o = LocateOptions { exec, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| locate_zeros_with(&f, &w, &o).unwrap()));
    }
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    // trefoil point: four simple zeros
    let q = QuarticQ::new(C64::new(0.3, 0.2), C64::new(0.0, 0.0)).qdiff();
    let mut g = c.benchmark_group("critical_graph");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| critical_graph(&q, &TraceOptions::default(), exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, classify, zeros, trajectories);
criterion_main!(benches);
