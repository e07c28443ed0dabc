use std::hint::black_box;

use coclab::classify::uniform_hyperbolicity_test;
use coclab::conjugacy::solve_conjugacy;
use coclab::lyapunov::integrated_exponent;
use coclab::product::iterate;
use coclab::{MeasureSpec, TorusPoint};
use coclab_bench::{cat, cat_derivative, hyperbolic_constant, perturbed_cat, schrodinger};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn product(c: &mut Criterion) {
    let (f, a) = (cat(), cat_derivative());
    let s = schrodinger();
    let p = TorusPoint::new(0.1, 0.2);
    let mut g = c.benchmark_group("iterate");
    for n in [1_000u64, 100_000] {
        g.bench_with_input(BenchmarkId::new("cat_derivative", n), &n, |b, &n| {
            b.iter(|| iterate(black_box(&a), &f, p, n).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("schrodinger", n), &n, |b, &n| {
            b.iter(|| iterate(black_box(&s), &f, p, n).unwrap())
        });
    }
    g.finish();
}

fn integrated(c: &mut Criterion) {
    let f = cat();
    let a = schrodinger();
    let mu = MeasureSpec::Lebesgue { n_orbits: 8, seed: 1 };
    c.bench_function("integrated_exponent/8x10^4", |b| {
        b.iter(|| integrated_exponent(black_box(&a), &f, &mu, 10_000).unwrap())
    });
}

fn hyperbolicity(c: &mut Criterion) {
    let f = cat();
    let a = hyperbolic_constant();
    let d = cat_derivative();
    let mut g = c.benchmark_group("uh_test");
    g.bench_function("constant_grid32", |b| b.iter(|| uniform_hyperbolicity_test(black_box(&a), &f, 32, 16).unwrap()));
    g.bench_function("derivative_grid32", |b| b.iter(|| uniform_hyperbolicity_test(black_box(&d), &f, 32, 16).unwrap()));
    g.finish();
}

fn conjugacy(c: &mut Criterion) {
    let (f, g) = (cat(), perturbed_cat(0.01));
    let mut group = c.benchmark_group("conjugacy");
    group.sample_size(10);
    for res in [64usize, 128] {
        group.bench_with_input(BenchmarkId::new("solve", res), &res, |b, &res| {
            b.iter(|| solve_conjugacy(&f, black_box(&g), res, 1.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, product, integrated, hyperbolicity, conjugacy);
criterion_main!(benches);
