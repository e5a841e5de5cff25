use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oqho_core::classical::simulate;
use oqho_core::cumulants::{cumulant_finite_td, delta_table};
use oqho_core::fixtures::{example_weight, paper_example};
use oqho_core::large_dev::DeviationAnalysis;
use oqho_core::quartic::WeightMatrix;
use rayon::{ThreadPool, ThreadPoolBuilder};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let default = ThreadPoolBuilder::new().build().unwrap();
    let single = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("parallel", default), ("sequential", single)]
}

fn workloads(c: &mut Criterion) {
    let model = paper_example();
    let pi = WeightMatrix::new(example_weight()).unwrap();
    let pools = pools();

    let mut group = c.benchmark_group("descent_table_r10");
    for (label, pool) in &pools {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| pool.install(|| delta_table(black_box(10)).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("simulate_20k_paths");
    group.sample_size(10);
    for (label, pool) in &pools {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| pool.install(|| simulate(&model, 0.1, 10, black_box(20_000), 7).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("third_cumulant_grid_201");
    group.sample_size(10);
    for (label, pool) in &pools {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| pool.install(|| cumulant_finite_td(&model, &pi, 3, black_box(20.0), 201).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("deviation_tables");
    group.sample_size(10);
    for (label, pool) in &pools {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| pool.install(|| DeviationAnalysis::new(black_box(&model), &pi).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, workloads);
criterion_main!(benches);
