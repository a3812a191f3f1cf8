use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fseval_bench::wobble;
use fseval_core::{bh_adjust, signflip_test, spearman};

fn signflip(c: &mut Criterion) {
    let mut g = c.benchmark_group("signflip");
    // 12 is enumerated exhaustively, 20 falls back to Monte Carlo
    for k in [12usize, 20] {
        let diffs = wobble(k, 1.0);
        g.bench_with_input(BenchmarkId::from_parameter(k), &diffs, |b, d| {
            b.iter(|| signflip_test(black_box(d), 10_000, 7).unwrap())
        });
    }
    g.finish();
}

fn adjust(c: &mut Criterion) {
    let p: Vec<f64> = wobble(1000, 2.0).iter().map(|x| x.abs()).collect();
    c.bench_function("bh_adjust 1000", |b| b.iter(|| bh_adjust(black_box(&p)).unwrap()));
}

fn rank_correlation(c: &mut Criterion) {
    let x = wobble(500, 3.0);
    let y = wobble(500, 4.0);
    c.bench_function("spearman 500", |b| {
        b.iter(|| spearman(black_box(&x), black_box(&y)).unwrap())
    });
}

criterion_group!(benches, signflip, adjust, rank_correlation);
criterion_main!(benches);
