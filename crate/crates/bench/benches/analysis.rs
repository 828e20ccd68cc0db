use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nbpeel::devolution::{bit_to_symbol, find_threshold, iteration_count, DeParams};
use nbpeel::ensemble::{convert_distribution, uniform_label_profile};
use nbpeel::DegreeDistribution;

fn code() -> (DegreeDistribution, DegreeDistribution) {
    (
        DegreeDistribution::new([(2, 0.71), (4, 0.23), (5, 0.03), (8, 0.01), (12, 0.02)]).unwrap(),
        DegreeDistribution::new([(5, 0.32), (6, 0.68)]).unwrap(),
    )
}

fn recursion(c: &mut Criterion) {
    let (lambda, rho) = code();
    let profile = uniform_label_profile(3);
    c.bench_function("convert_distribution", |b| {
        b.iter(|| convert_distribution(black_box(&lambda), &profile))
    });
    let params = DeParams::from_code(&lambda, &rho, 3, 0.3).unwrap();
    let (g0, gl) = (bit_to_symbol(1e-3, 3), bit_to_symbol(1e-7, 3));
    c.bench_function("iteration_count", |b| {
        b.iter(|| iteration_count(black_box(&params), g0, gl).unwrap())
    });
    let mut group = c.benchmark_group("threshold");
    group.sample_size(10);
    group.bench_function("bisection", |b| {
        b.iter(|| find_threshold(&lambda, &rho, 3, 1e-4).unwrap())
    });
    group.finish();
}

criterion_group!(benches, recursion);
criterion_main!(benches);
