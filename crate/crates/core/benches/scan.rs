use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use msl_transfer::solvers::escape::escape_scan;
use msl_transfer::solvers::{band_structure, linspace, KronigPenney, ScanOptions};
use msl_transfer::{make_quantum_medium, Execution, Layer, LayeredStructure, Result, Variant};

fn well(e: f64) -> Result<LayeredStructure> {
    let barrier = make_quantum_medium(1.0, 10.0, e, 1.0)?;
    let inside = make_quantum_medium(1.0, 0.0, e, 1.0)?;
    LayeredStructure::new(barrier.clone(), vec![Layer::new(inside, 2.0)?], barrier)
}

fn opts(exec: Execution) -> ScanOptions {
    ScanOptions { exec, ..Default::default() }
}

fn bench(c: &mut Criterion) {
    let grid = linspace(0.0, 10.0, 4000);
    let mut group = c.benchmark_group("escape_scan");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| escape_scan("energy", well, Variant::H, &grid, &opts(exec)).unwrap())
        });
    }
    group.finish();

    let kp = KronigPenney::symmetric(10.0, 1.0, 1.0);
    let q_grid = linspace(0.0, PI / kp.period_length(), 32);
    let e_grid = linspace(0.05, 30.0, 400);
    let mut group = c.benchmark_group("band_structure");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| band_structure(|e| kp.period(e), &q_grid, &e_grid, Variant::H, &opts(exec)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
