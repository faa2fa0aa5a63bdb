use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use saddlecert::minimax::grid_minimax_with;
use saddlecert::{Bilinear, Domain, Execution, Objective, PhiContext};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn matching_pennies() -> Objective {
    Bilinear::product(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).unwrap().into()
}

fn grid(c: &mut Criterion) {
    let f: Objective = Bilinear::product(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0])).unwrap().into();
    let sq = Domain::cube(2, -1.0, 1.0).unwrap();
    let mut group = c.benchmark_group("grid_minimax");
    group.sample_size(10);
    for res in [21, 41] {
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, res), &res, |b, &res| {
                b.iter(|| grid_minimax_with(&f, &sq, &sq, black_box(res), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn phi(c: &mut Criterion) {
    let s2 = Domain::simplex(2).unwrap();
    let mut group = c.benchmark_group("phi");
    for res in [32, 128] {
        for (name, exec) in modes() {
            let ctx = PhiContext::new(matching_pennies(), s2.clone(), s2.clone(), res).unwrap().with_execution(exec);
            group.bench_with_input(BenchmarkId::new(format!("value/{name}"), res), &ctx, |b, ctx| {
                b.iter(|| ctx.phi(black_box(&[0.8, 0.2]), black_box(&[0.3, 0.7])).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("gradient/{name}"), res), &ctx, |b, ctx| {
                b.iter(|| ctx.phi_gradient(black_box(&[0.8, 0.2]), black_box(&[0.3, 0.7])).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, grid, phi);
criterion_main!(benches);
