//! Benchmarks for the hot paths: metric likelihood, lambda gradients,
//! tree fitting, and a short boosting run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use rankweave_core::corpus::Relevance;
use rankweave_core::ltr::{
    delta_ndcg, fit_tree, lambda_gradients, ndcg, train_lambdamart, FeatureMatrix, RatedList,
    TrainConfig, Truncation,
};
use rankweave_core::metric::{
    metric_gradient, metric_loss, pair_label_probabilities, DocLabels, MetricParams,
    PairObservation,
};

fn random_observations(n: usize, seed: u64) -> Vec<PairObservation> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut side = |rng: &mut ChaCha12Rng| DocLabels {
                ir: Relevance::from_index(rng.random_range(0..3u8)).unwrap(),
                ia: rng.random_range(0.0..1.0),
                wm: rng.random_bool(0.2),
            };
            let left = side(&mut rng);
            let right = side(&mut rng);
            let mut counts = [0u32; 5];
            for c in counts.iter_mut() {
                *c = rng.random_range(0..4);
            }
            counts[2] += 1;
            PairObservation {
                left,
                right,
                counts,
            }
        })
        .collect()
}

fn random_queries(n_queries: usize, docs: usize, dims: usize, seed: u64) -> Vec<RatedList> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n_queries)
        .map(|q| {
            let mut features = FeatureMatrix::new(dims);
            let mut gains = Vec::with_capacity(docs);
            for _ in 0..docs {
                let quality: f64 = rng.random_range(0.0..1.0);
                let row: Vec<f64> = (0..dims)
                    .map(|d| {
                        if d == 0 {
                            quality + rng.random_range(-0.2..0.2)
                        } else {
                            rng.random_range(-1.0..1.0)
                        }
                    })
                    .collect();
                features.push_row(&row).unwrap();
                gains.push((4.0 * quality).exp2() - 1.0);
            }
            RatedList {
                query_id: format!("q{q}"),
                gains,
                features,
            }
        })
        .collect()
}

fn bench_ndcg(c: &mut Criterion) {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let gains: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..15.0)).collect();
    c.bench_function("ndcg_30_docs", |b| {
        b.iter(|| ndcg(black_box(&gains), Truncation::At(10)))
    });
    c.bench_function("delta_ndcg_30_docs", |b| {
        b.iter(|| delta_ndcg(black_box(&gains), 2, 17, Truncation::At(10)).unwrap())
    });
}

fn bench_lambda_gradients(c: &mut Criterion) {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let gains: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..15.0)).collect();
    let scores: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("lambda_gradients_30_docs", |b| {
        b.iter(|| {
            lambda_gradients(
                black_box(&scores),
                black_box(&gains),
                Truncation::At(10),
                1.0,
            )
        })
    });
}

fn bench_metric(c: &mut Criterion) {
    let params = MetricParams::default_init();
    c.bench_function("pair_label_probabilities", |b| {
        b.iter(|| pair_label_probabilities(black_box(0.7), black_box(0.4), &params))
    });
    let obs = random_observations(3000, 3);
    c.bench_function("metric_loss_3000_pairs", |b| {
        b.iter(|| metric_loss(black_box(&obs), &params))
    });
    c.bench_function("metric_gradient_3000_pairs", |b| {
        b.iter(|| metric_gradient(black_box(&obs), &params))
    });
}

fn bench_trees(c: &mut Criterion) {
    let queries = random_queries(200, 30, 6, 4);
    let mut features = FeatureMatrix::new(6);
    let mut lambdas = Vec::new();
    let mut hessians = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for q in &queries {
        for i in 0..q.features.rows() {
            features.push_row(q.features.row(i)).unwrap();
            lambdas.push(rng.random_range(-1.0..1.0));
            hessians.push(rng.random_range(0.01..0.5));
        }
    }
    let config = TrainConfig::default();
    c.bench_function("fit_tree_6000_docs", |b| {
        b.iter(|| fit_tree(black_box(&features), &lambdas, &hessians, &config).unwrap())
    });

    let short = TrainConfig {
        n_trees: 10,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("boosting");
    group.sample_size(10);
    group.bench_function("train_10_trees_200x30", |b| {
        b.iter(|| train_lambdamart(black_box(&queries), &short).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_ndcg,
    bench_lambda_gradients,
    bench_metric,
    bench_trees
);
criterion_main!(benches);
