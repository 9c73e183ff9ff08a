use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dunkl_bench::{a2_exact, b2_evaluator, b2_exact, b2_float, spiral};
use dunkl_core::poly::parse_polynomial;
use dunkl_core::quad::gauss_rule;
use dunkl_core::CRational;

fn prepare(c: &mut Criterion) {
    let mut g = c.benchmark_group("prepare");
    g.sample_size(10);
    for n in [4, 8] {
        g.bench_with_input(BenchmarkId::new("b2_exact", n), &n, |b, &n| {
            b.iter(|| {
                let mut ctx = b2_exact();
                ctx.prepare(n).unwrap();
                ctx
            })
        });
        g.bench_with_input(BenchmarkId::new("b2_float", n), &n, |b, &n| {
            b.iter(|| {
                let mut ctx = b2_float();
                ctx.prepare(n).unwrap();
                ctx
            })
        });
    }
    g.bench_function("a2_exact/6", |b| {
        b.iter(|| {
            let mut ctx = a2_exact();
            ctx.prepare(6).unwrap();
            ctx
        })
    });
    g.finish();
}

fn intertwine(c: &mut Criterion) {
    let mut ctx = b2_exact();
    ctx.prepare(8).unwrap();
    let p = parse_polynomial::<CRational>("x1^5 x2^3 - 2 x1^2 x2^6 + x2^8", 2).unwrap();
    c.bench_function("intertwine/b2_degree8", |b| b.iter(|| ctx.intertwine(black_box(&p)).unwrap()));
    c.bench_function("solve_h/b2_n8", |b| b.iter(|| ctx.solve_h(black_box(8)).unwrap()));
}

fn kernel(c: &mut Criterion) {
    let ev = b2_evaluator(14);
    let pts = spiral(256);
    c.bench_function("lk_hermite/b2_N14_256pts", |b| {
        b.iter(|| {
            pts.iter()
                .map(|x| ev.lk_truncated(x, black_box(&[0.3, -0.2])).unwrap().re)
                .sum::<f64>()
        })
    });
    c.bench_function("tail_bound/b2_N14", |b| b.iter(|| ev.tail(black_box(&[0.1, 0.05]), black_box(&[1.0, 0.5]))));
}

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("gauss_rule");
    for (d, q) in [(1, 64), (2, 24), (3, 12)] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_q{q}")), &(d, q), |b, &(d, q)| {
            b.iter(|| gauss_rule(d, q).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, prepare, intertwine, kernel, quadrature);
criterion_main!(benches);
