use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nls_core::grid::{laplacian, Field, Grid};
use nls_core::minimizer::{solve_ground_state, SolverOptions};
use nls_core::model::{sample_model, SampledModel};
use nls_core::nehari::{project, riesz_gradient};
use nls_core::presets;
use nls_core::{CertifyOptions, Problem};

fn kerr(n: usize) -> SampledModel {
    let (model, mut spec) = presets::kerr_soliton();
    spec.n = n;
    sample_model(&model, &Grid::new(spec).unwrap()).unwrap()
}

fn bump(g: &Grid) -> Field {
    Field::from_fn(g, |x| 1.2 * (-(x[0] - 20.6).powi(2) / 3.0).exp() * (1.0 + 0.1 * (3.0 * x[0]).sin())).unwrap()
}

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernels");
    for n in [256usize, 1024, 4096] {
        let m = kerr(n);
        let u = bump(&m.grid);
        group.bench_with_input(BenchmarkId::new("laplacian", n), &u, |b, u| {
            b.iter(|| laplacian(black_box(u)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("project", n), &u, |b, u| {
            b.iter(|| project(black_box(u), &m).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("riesz_gradient", n), &u, |b, u| {
            b.iter(|| riesz_gradient(black_box(u), &m).unwrap())
        });
    }
    group.finish();
}

fn solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (name, model, spec) in [presets::builtin().remove(0), presets::builtin().remove(2)] {
        let p = Problem::certify(&model, &Grid::new(spec).unwrap(), &CertifyOptions::default()).unwrap();
        let opts = SolverOptions::default();
        group.bench_function(name, |b| b.iter(|| solve_ground_state(&p, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kernels, solves);
criterion_main!(benches);
