//! Criterion benchmarks for the hot numerical kernels: the exact Ky Fan
//! scan, subset enumeration, driver synthesis, partition sums, semigroup
//! convolution and the mild-solution assembly.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smcalc_core::*;
use std::hint::black_box;
use std::sync::Arc;

fn bench_ky_fan(c: &mut Criterion) {
    let mut group = c.benchmark_group("ky_fan");
    for m in [1_000usize, 10_000, 100_000] {
        let ps = ProbSpace::new(m, 1).unwrap();
        let e = ps.sample_standard_normal(0);
        group.bench_with_input(BenchmarkId::from_parameter(m), &e, |b, e| {
            b.iter(|| ky_fan(black_box(e)).unwrap())
        });
    }
    group.finish();
}

fn bench_subset_inequality(c: &mut Criterion) {
    let ps = ProbSpace::new(1_000, 2).unwrap();
    let xs: Vec<Ensemble> = (0..8).map(|k| ps.sample_standard_normal(k)).collect();
    let coeffs = vec![0.5; 8];
    c.bench_function("subset_inequality_l8_m1000", |b| {
        b.iter(|| check_subset_inequality(black_box(&xs), black_box(&coeffs)).unwrap())
    });
}

fn bench_drivers(c: &mut Criterion) {
    let ps = ProbSpace::new(200, 3).unwrap();
    let mut group = c.benchmark_group("driver_synthesis");
    group.sample_size(10);
    group.bench_function("wiener_n1024", |b| {
        b.iter(|| Driver::new(&ps, DriverKind::Wiener, 1.0, 10, 0).unwrap())
    });
    group.bench_function("fbm_h07_n512", |b| {
        b.iter(|| Driver::new(&ps, DriverKind::Fbm { hurst: 0.7 }, 1.0, 9, 0).unwrap())
    });
    group.finish();
}

fn bench_riemann_sum(c: &mut Criterion) {
    let ps = ProbSpace::new(1_000, 4).unwrap();
    let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 10, 0).unwrap();
    let field = RandomField::from_cumulative(d.path_process());
    let unit = BoxDomain::interval(0.0, 1.0).unwrap();
    let mut group = c.benchmark_group("riemann_sum_brownian");
    group.sample_size(20);
    for level in [6u32, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, &l| {
            b.iter(|| riemann_sum(black_box(&field), &unit, l, TagRule::Center).unwrap())
        });
    }
    group.finish();
}

fn bench_semigroup_apply(c: &mut Criterion) {
    let op = EllipticOperator::heat_1d();
    let grid = SpatialGrid::symmetric(1, 10.0, 0.04).unwrap();
    let sg = SemigroupOp::new(&op, &grid, 0.25).unwrap();
    let values: Vec<f64> = (0..grid.len())
        .map(|i| (-grid.node(i)[0].powi(2)).exp())
        .collect();
    c.bench_function("semigroup_apply_501_nodes", |b| {
        b.iter(|| sg.apply(black_box(&values)))
    });
}

fn bench_mild_solution(c: &mut Criterion) {
    let ps = ProbSpace::new(200, 5).unwrap();
    let vop = kernel_validation_gate(&EllipticOperator::heat_1d(), &GateConfig::default())
        .unwrap();
    let grid = SpatialGrid::symmetric(1, 10.0, 0.05).unwrap();
    let driver = Arc::new(Driver::new(&ps, DriverKind::Wiener, 1.0, 8, 0).unwrap());
    let mut group = c.benchmark_group("mild_solution");
    group.sample_size(10);
    group.bench_function("level6_m200", |b| {
        b.iter(|| {
            let data = ProblemData {
                initial: InitialCondition::deterministic(|x| (-x[0] * x[0]).exp()),
                terms: vec![ForcingTerm::new(Arc::clone(&driver), |x: &[f64], _| {
                    (-x[0] * x[0]).exp()
                })],
            };
            mild_solution(&vop, &data, &grid, &[0.5], 6).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_ky_fan,
    bench_subset_inequality,
    bench_drivers,
    bench_riemann_sum,
    bench_semigroup_apply,
    bench_mild_solution
);
criterion_main!(benches);
