use cohomolib_core::livsic::LivsicSolver;
use cohomolib_core::pcf::PcfSettings;
use cohomolib_core::{BandLimitedFunction, GridFunction, IntMatrix, Workers};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

fn observable() -> (BandLimitedFunction, IntMatrix) {
    let m = IntMatrix::from_rows(&[[2, 1], [1, 1]]).unwrap();
    let u = BandLimitedFunction::from_half(
        2,
        [
            (vec![1, 0], Complex64::new(0.3, -0.1)),
            (vec![1, -2], Complex64::new(0.05, 0.2)),
            (vec![2, 3], Complex64::new(-0.1, 0.04)),
        ],
    )
    .unwrap();
    (BandLimitedFunction::coboundary(&u, &m, 0.25).unwrap(), m)
}

fn worker_counts() -> Vec<(&'static str, Workers)> {
    vec![("sequential", Workers::SEQUENTIAL), ("pool", Workers(0))]
}

fn livsic_grid(c: &mut Criterion) {
    let (phi, m) = observable();
    let solver = LivsicSolver::new(&phi, &m, PcfSettings::default()).unwrap();
    let mut group = c.benchmark_group("livsic_grid");
    group.sample_size(10);
    for n in [64usize, 128] {
        for (label, workers) in worker_counts() {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, &n| {
                b.iter(|| solver.solve_grid(black_box(n), workers).unwrap())
            });
        }
    }
    group.finish();
}

fn grid_sampling(c: &mut Criterion) {
    let (phi, _) = observable();
    let mut group = c.benchmark_group("grid_sampling");
    for (label, workers) in worker_counts() {
        group.bench_function(label, |b| b.iter(|| GridFunction::sample(black_box(&phi), 256, workers)));
    }
    group.finish();
}

criterion_group!(benches, livsic_grid, grid_sampling);
criterion_main!(benches);
