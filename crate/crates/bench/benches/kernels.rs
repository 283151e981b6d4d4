use std::hint::black_box;

use consensus_subgrad::{backward_product, check_a1, compute_abs_prob, ergodicity_coefficient, pushsum_abs_prob};
use consensus_subgrad_bench::{random_column_sequence, random_row_sequence};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn tau(c: &mut Criterion) {
    let mut g = c.benchmark_group("ergodicity_coefficient");
    for n in [4, 16, 64] {
        let p = random_row_sequence(n, 1).at(0).into_owned();
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| ergodicity_coefficient(black_box(p))));
    }
    g.finish();
}

fn products(c: &mut Criterion) {
    let mut g = c.benchmark_group("backward_product");
    for n in [4, 16] {
        let seq = random_row_sequence(n, 2);
        g.bench_with_input(BenchmarkId::new("100_factors", n), &seq, |b, seq| b.iter(|| backward_product(black_box(seq), 0, 100)));
    }
    g.finish();
}

fn abs_prob(c: &mut Criterion) {
    let mut g = c.benchmark_group("abs_prob");
    g.sample_size(20);
    let seq = random_row_sequence(8, 3);
    let report = check_a1(&seq, 64, 4);
    g.bench_function("backward_limit_n8_h200", |b| b.iter(|| compute_abs_prob(black_box(&seq), Some(&report), 200, 1e-10)));
    let a = random_column_sequence(8, 4);
    let y0 = vec![1.0; 8];
    g.bench_function("pushsum_n8_h200", |b| b.iter(|| pushsum_abs_prob(black_box(&a), &y0, 200)));
    g.finish();
}

criterion_group!(benches, tau, products, abs_prob);
criterion_main!(benches);
