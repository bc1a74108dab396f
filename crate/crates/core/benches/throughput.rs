use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use idense::classify::{evaluate, ClassifierConfig};
use idense::embed::{kmeans, KmeansParams};
use idense::features::{CorpusFeatures, FeatureSpec};
use idense::pid::{self, Measure, PidSettings};
use idense::{par, seed, synth};
use rand::Rng;

fn modes() -> Vec<(&'static str, usize)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    vec![("sequential", 1), ("parallel", all)]
}

fn scoring(c: &mut Criterion) {
    let mut rng = seed::rng(1, &[]);
    let docs: Vec<_> = (0..2000).map(|i| synth::random_transcript(&mut rng, &format!("d{i}"))).collect();
    let settings = PidSettings::default();
    let mut group = c.benchmark_group("score_depid_r_add");
    for (name, threads) in modes() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| {
                par::with_threads(threads, || {
                    par::map(&docs, |t| pid::score(t, Measure::DepidRAdd, &settings).map(|s| s.value).unwrap_or(0.0))
                })
            })
        });
    }
    group.finish();
}

fn clustering(c: &mut Criterion) {
    let mut rng = seed::rng(2, &[]);
    let points: Vec<Vec<f64>> = (0..2000).map(|_| (0..50).map(|_| rng.random::<f64>()).collect()).collect();
    let params = KmeansParams {
        k: 10,
        restarts: 8,
        ..Default::default()
    };
    let mut group = c.benchmark_group("kmeans");
    group.sample_size(10);
    for (name, threads) in modes() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| par::with_threads(threads, || kmeans(black_box(&points), &params).unwrap()))
        });
    }
    group.finish();
}

fn cross_validation(c: &mut Criterion) {
    let study = synth::synthetic_study(&synth::StudyParams::default(), 3).unwrap();
    let source = CorpusFeatures::new(&study, None, FeatureSpec::default()).unwrap();
    let config = ClassifierConfig {
        repeats: 16,
        ..Default::default()
    };
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    for (name, threads) in modes() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| par::with_threads(threads, || evaluate(&source, &config).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, scoring, clustering, cross_validation);
criterion_main!(benches);
