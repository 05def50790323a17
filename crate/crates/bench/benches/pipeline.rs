//! Benchmarks of the hot paths: secular roots, fixed-point solves, density
//! grids, synthetic draws and full estimation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eigenpower::model::{draw, scenario_a};
use eigenpower::secular::{etas, mus};
use eigenpower::{
    estimate_stieltjes, infer_joint, lsd_density, solve_m_f, EigenSample, NoiseLevel,
    PowerProfile, SystemShape,
};

fn random_lambdas(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut l: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..10.0)).collect();
    l.sort_by(f64::total_cmp);
    l
}

fn bench_secular(c: &mut Criterion) {
    let mut group = c.benchmark_group("secular");
    for &n in &[64usize, 600] {
        let l = random_lambdas(n);
        group.bench_with_input(BenchmarkId::new("etas", n), &l, |b, l| {
            b.iter(|| etas(l).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mus", n), &l, |b, l| {
            b.iter(|| mus(l, 10 * n).unwrap())
        });
    }
    group.finish();
}

fn bench_solver(c: &mut Criterion) {
    let profile = PowerProfile::new(&[1.0, 3.0, 10.0], &[2, 2, 2]).unwrap();
    let shape = SystemShape::new(60, 600, 6).unwrap();
    let noise = NoiseLevel::new(0.1).unwrap();
    let mut group = c.benchmark_group("stieltjes_solve");
    group.bench_function("inside_cluster", |b| {
        b.iter(|| solve_m_f(Complex64::new(3.0, 1e-9), &profile, &shape, &noise).unwrap())
    });
    group.bench_function("left_of_spectrum", |b| {
        b.iter(|| solve_m_f(Complex64::new(-0.5, 1e-9), &profile, &shape, &noise).unwrap())
    });
    group.bench_function("density_200pt", |b| {
        let grid: Vec<f64> = (0..200).map(|i| 12.0 * i as f64 / 199.0 + 0.01).collect();
        b.iter(|| lsd_density(&grid, &profile, &shape, &noise, 1e-9).unwrap())
    });
    group.finish();
}

fn bench_model_and_estimators(c: &mut Criterion) {
    let spec = scenario_a(6, 20.0).unwrap();
    let mut group = c.benchmark_group("pipeline");
    group.bench_function("draw_n60", |b| b.iter(|| draw(&spec).unwrap()));
    let d = draw(&spec).unwrap();
    group.bench_function("eigen_sample_n60", |b| {
        b.iter(|| EigenSample::new(d.eigenvalues.clone(), 600).unwrap())
    });
    let sample = EigenSample::new(d.eigenvalues.clone(), 600).unwrap();
    group.bench_function("estimate_stieltjes", |b| {
        b.iter(|| estimate_stieltjes(&sample, &[2, 2, 2]).unwrap())
    });
    group.bench_function("infer_joint_16hyp", |b| {
        b.iter(|| infer_joint(&sample, 6, 3, &Default::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_secular, bench_solver, bench_model_and_estimators);
criterion_main!(benches);
