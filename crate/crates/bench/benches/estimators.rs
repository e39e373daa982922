//! Benchmarks for the hot paths: neighbor queries, the full summary
//! engine, and one Monte Carlo envelope test.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use markpp::mctest::{test_random_labelling, EnvelopeConfig, TestStatistic};
use markpp::{
    summarize, MarkSet, NeighborIndex, PerMarkIntensity, RGrid, SpatialField, SummaryConfig,
    Surface,
};
use markpp_bench::uniform_pattern;

fn bench_neighbor_queries(c: &mut Criterion) {
    let mut group = c.benchmark_group("neighbor_index");
    for n in [500usize, 5000] {
        let pattern = uniform_pattern(n, 42);
        let r = 0.05;
        group.bench_with_input(BenchmarkId::new("grid", n), &pattern, |b, pattern| {
            let index = NeighborIndex::build(pattern, r);
            let probes = uniform_pattern(256, 7);
            b.iter(|| {
                let mut total = 0usize;
                for p in probes.points() {
                    total += index.ball_query_dist2(p.loc, r, MarkSet::full(2)).len();
                }
                black_box(total)
            })
        });
        group.bench_with_input(BenchmarkId::new("brute", n), &pattern, |b, pattern| {
            let probes = uniform_pattern(256, 7);
            b.iter(|| {
                let mut total = 0usize;
                for p in probes.points() {
                    total += pattern
                        .points()
                        .iter()
                        .filter(|q| q.loc.dist2(p.loc) <= r * r)
                        .count();
                }
                black_box(total)
            })
        });
    }
    group.finish();
}

fn bench_summarize(c: &mut Criterion) {
    let mut group = c.benchmark_group("summarize");
    group.sample_size(20);
    for n in [200usize, 2000] {
        let pattern = uniform_pattern(n, 1);
        let model =
            PerMarkIntensity::constant(*pattern.window(), &[n as f64 / 2.0, n as f64 / 2.0])
                .unwrap();
        let cfg = SummaryConfig::new(RGrid::regular(0.125, 26).unwrap());
        group.bench_with_input(BenchmarkId::from_parameter(n), &pattern, |b, pattern| {
            b.iter(|| {
                summarize(
                    black_box(pattern),
                    &model,
                    MarkSet::single(markpp::Mark(0)),
                    MarkSet::single(markpp::Mark(1)),
                    &cfg,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_random_labelling_test(c: &mut Criterion) {
    let mut group = c.benchmark_group("random_labelling_test");
    group.sample_size(10);
    let pattern = uniform_pattern(400, 3);
    let ground: Arc<dyn SpatialField> = Arc::new(Surface::Constant(400.0));
    let mut summary = SummaryConfig::new(RGrid::new(vec![0.02, 0.05, 0.08]).unwrap());
    summary.probe_per_side = 32;
    let mut cfg = EnvelopeConfig::new(TestStatistic::J, summary);
    cfg.n_replicates = 19;
    cfg.rank = 1;
    group.bench_function("n400_r19", |b| {
        b.iter(|| {
            test_random_labelling(
                black_box(&pattern),
                Arc::clone(&ground),
                MarkSet::single(markpp::Mark(0)),
                MarkSet::single(markpp::Mark(1)),
                &cfg,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_neighbor_queries,
    bench_summarize,
    bench_random_labelling_test
);
criterion_main!(benches);
