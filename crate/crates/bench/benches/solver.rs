use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hcma_bench::mms_problem;
use hcma_core::solver::linear::{gmres, GmresOptions, Ilu0};
use hcma_core::solver::{solve_continuation, Discretization};
use hcma_core::SolveOptions;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for m in [9, 13, 17] {
        let p = mms_problem(m);
        let disc = Discretization::new(&p.grid, &p.metric, &p.chi).unwrap();
        let psi = disc.interior_values(&p.psi);
        let u = p.usub.values();
        group.bench_with_input(BenchmarkId::new("residual", m), &m, |b, _| b.iter(|| disc.residual(black_box(u), &psi).unwrap()));
        group.bench_with_input(BenchmarkId::new("jacobian", m), &m, |b, _| b.iter(|| disc.jacobian(black_box(u)).unwrap()));
    }
    group.finish();
}

fn linear(c: &mut Criterion) {
    let mut group = c.benchmark_group("linear");
    group.sample_size(20);
    for m in [9, 13, 17] {
        let p = mms_problem(m);
        let disc = Discretization::new(&p.grid, &p.metric, &p.chi).unwrap();
        let a = disc.jacobian(p.usub.values()).unwrap();
        let rhs: Vec<f64> = (0..disc.unknowns()).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let opts = GmresOptions { rtol: 1e-12, restart: 60, max_iters: 20_000 };
        group.bench_with_input(BenchmarkId::new("ilu0", m), &a, |b, a| b.iter(|| Ilu0::new(black_box(a)).unwrap()));
        let ilu = Ilu0::new(&a).unwrap();
        group.bench_with_input(BenchmarkId::new("gmres", m), &a, |b, a| b.iter(|| gmres(a, black_box(&rhs), &ilu, opts).unwrap()));
    }
    group.finish();
}

fn full_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for m in [9, 13] {
        let p = mms_problem(m);
        group.bench_with_input(BenchmarkId::new("continuation", m), &p, |b, p| {
            b.iter(|| solve_continuation(black_box(p), &SolveOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, linear, full_solve);
criterion_main!(benches);
