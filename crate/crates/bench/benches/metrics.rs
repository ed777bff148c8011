use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kl2clust::clustering::{agglomerate, pairwise_distances};
use kl2clust::features::{extract_mfcc, FrameConfig};
use kl2clust::kl2::{kl2_parts, PreparedStats};
use kl2clust::stats::compute_stats;
use kl2clust::vq::{aqd, train_codebook};
use kl2clust::{MetricConfig, MetricKind, RegularizationPolicy};
use kl2clust_bench::{gaussian_features, small_surface, tone};
use std::hint::black_box;

fn bench_kl2(c: &mut Criterion) {
    let p = RegularizationPolicy::default();
    let a = PreparedStats::new(compute_stats(&gaussian_features(1, 500, 13), &p).unwrap()).unwrap();
    let b = PreparedStats::new(compute_stats(&gaussian_features(2, 500, 13), &p).unwrap()).unwrap();
    c.bench_function("kl2_prepared_d13", |bch| bch.iter(|| kl2_parts(black_box(&a), black_box(&b)).unwrap()));

    let mut g = c.benchmark_group("compute_stats");
    for n in [100, 1000, 10_000] {
        let m = gaussian_features(3, n, 13);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |bch, m| bch.iter(|| compute_stats(m, &p).unwrap()));
    }
    g.finish();
}

fn bench_mfcc(c: &mut Criterion) {
    let audio = tone(10.0);
    let cfg = FrameConfig::default();
    c.bench_function("mfcc_10s_16k", |b| b.iter(|| extract_mfcc(black_box(&audio), &cfg).unwrap()));
}

fn bench_vq(c: &mut Criterion) {
    let x = gaussian_features(4, 1000, 13);
    let mut g = c.benchmark_group("train_codebook_1000rows");
    g.sample_size(20);
    for k in [8, 64] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| b.iter(|| train_codebook(&x, k, 0).unwrap()));
    }
    g.finish();
    let book = train_codebook(&x, 64, 0).unwrap();
    let q = gaussian_features(5, 1000, 13);
    c.bench_function("aqd_1000x64", |b| b.iter(|| aqd(black_box(&q), &book).unwrap()));
}

fn bench_clustering(c: &mut Criterion) {
    let segs: Vec<_> = (0..100).map(|i| gaussian_features(100 + i, 200, 13)).collect();
    let metric = MetricConfig::new(MetricKind::Kl2);
    let surface = small_surface();
    let mut g = c.benchmark_group("clustering_100_segments");
    g.sample_size(20);
    g.bench_function("pairwise_corrected", |b| b.iter(|| pairwise_distances(&segs, &metric, Some(&surface)).unwrap()));
    let d = pairwise_distances(&segs, &metric, None).unwrap();
    g.bench_function("agglomerate", |b| b.iter(|| agglomerate(black_box(&d))));
    g.finish();
}

criterion_group!(benches, bench_kl2, bench_mfcc, bench_vq, bench_clustering);
criterion_main!(benches);
