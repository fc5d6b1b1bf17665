use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levelset_core::adaptive::{sample_buffer, SamplerConfig};
use levelset_core::bench::{learn_model, TrainConfig};
use levelset_core::levelset::relaxed_beta;
use levelset_core::oracles::{Oracle, PourLike};
use levelset_core::{par, PosteriorModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pour_model() -> (PosteriorModel, Vec<f64>) {
    let oracle = PourLike;
    let context = oracle.nominal_context();
    let out = learn_model(&oracle, &context, &TrainConfig::for_oracle("pour"), 7).expect("pour model");
    (out.model().expect("factorizes"), context)
}

fn buffer_refill(c: &mut Criterion) {
    let (model, context) = pour_model();
    let bounds = PourLike.theta_bounds();
    let cfg = SamplerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rb = relaxed_beta(&model, &context, &bounds, cfg.rho, &cfg.maximizer, &mut rng).expect("beta");
    let init = vec![rb.argmax.clone()];
    let mut group = c.benchmark_group("buffer_refill");
    group.sample_size(10);
    for (label, workers) in [("parallel", 0), ("sequential", 1)] {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                par::with_workers(workers, || {
                    let mut rng = ChaCha8Rng::seed_from_u64(2);
                    black_box(sample_buffer(&model, &context, &bounds, rb.beta, &init, &cfg, &mut rng).expect("buffer"))
                })
            })
        });
    }
    group.finish();
}

fn posterior_sweep(c: &mut Criterion) {
    let (model, context) = pour_model();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..4096).map(|_| PourLike.theta_bounds().sample_uniform(&mut rng)).collect();
    let mut group = c.benchmark_group("posterior_sweep");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map_slice(&points, |p| model.predict_split(p, &context))))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_range_sequential(points.len(), |i| model.predict_split(&points[i], &context))))
    });
    group.finish();
}

criterion_group!(benches, buffer_refill, posterior_sweep);
criterion_main!(benches);
