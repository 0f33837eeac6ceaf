use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use padres_core::eigen;
use padres_core::model::{Hamiltonian, ScaledOperator, ScalingParameter};
use padres_core::schlessinger::{self, subsample_indices};
use padres_core::stabilization;
use padres_core::C64;

fn fit_and_evaluate(c: &mut Criterion) {
    let data = padres_bench::benchmark_sweep();
    let window = padres_bench::flattest_window(&data);
    let points: Vec<(f64, f64)> = subsample_indices(window.len(), 25).into_iter().map(|i| window[i]).collect();
    c.bench_function("schlessinger_fit_m25", |b| b.iter(|| schlessinger::fit(black_box(&points)).unwrap()));
    let cf = schlessinger::fit(&points).unwrap();
    let eta = C64::from_polar(1.2, 0.2);
    c.bench_function("schlessinger_evaluate_m25", |b| b.iter(|| schlessinger::evaluate(&cf, black_box(eta))));
}

fn eigensolve(c: &mut Criterion) {
    let ham = Hamiltonian::benchmark();
    let pair = ham.matrices_at(ScalingParameter::new(1.2, 0.2).eta()).unwrap();
    c.bench_function("complex_eig_n60", |b| b.iter(|| eigen::eig_pair(black_box(&pair)).unwrap()));
}

fn sweep(c: &mut Criterion) {
    let ham = Hamiltonian::benchmark();
    let grid: Vec<f64> = (0..21).map(|i| 0.6 + 0.05 * i as f64).collect();
    let cfg = padres_core::config::Config::default();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("real_sweep_21", |b| b.iter(|| stabilization::sweep(&ham, black_box(&grid), cfg.sweep).unwrap()));
    group.finish();
}

criterion_group!(benches, fit_and_evaluate, eigensolve, sweep);
criterion_main!(benches);
