use criterion::{criterion_group, criterion_main, Criterion};
use sage_bench::{random_map, random_mask, rng};
use sage_core::map::DEFAULT_DIMS;
use sage_core::metrics::{self, ThresholdPolicy};

fn frame_metrics(c: &mut Criterion) {
    let mut r = rng(1);
    let pred = random_map(&mut r, DEFAULT_DIMS);
    let gt = random_map(&mut r, DEFAULT_DIMS);
    let mask = random_mask(&mut r, DEFAULT_DIMS, 0.1);
    let policy = ThresholdPolicy::default();

    let mut g = c.benchmark_group("metrics_128x256");
    g.bench_function("kl_div", |b| {
        b.iter(|| metrics::kl_div(&pred, &gt).unwrap())
    });
    g.bench_function("pearson_cc", |b| {
        b.iter(|| metrics::pearson_cc(&pred, &gt).unwrap())
    });
    g.bench_function("binarize_f1", |b| {
        b.iter(|| metrics::f_beta(&metrics::binarize(&pred, policy), &mask, 1.0).unwrap())
    });
    g.bench_function("mae", |b| b.iter(|| metrics::mae(&pred, &mask).unwrap()));
    g.bench_function("evaluate_frame", |b| {
        b.iter(|| metrics::evaluate_frame(&pred, &gt, &mask, policy).unwrap())
    });
    g.finish();
}

criterion_group!(benches, frame_metrics);
criterion_main!(benches);
