//! Hot-path benchmarks: forward/backward, contrastive batches, the shift
//! test, and mask optimization steps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netsentry_core::adapt::{adaptation_loss, AdaptConfig, TeacherSnapshot};
use netsentry_core::contrastive::{total_loss_with_tape, ContrastiveConfig};
use netsentry_core::data::{LabeledSample, Label};
use netsentry_core::explain::{objective_grad, ExplainConfig};
use netsentry_core::nn::GradientTape;
use netsentry_core::shift::{permutation_test, ShiftConfig};
use netsentry_core::{Architecture, Autoencoder};

fn batch(rng: &mut ChaCha8Rng, dim: usize, normals: usize, abnormals: usize) -> Vec<LabeledSample> {
    let mut samples = Vec::new();
    for i in 0..normals + abnormals {
        let center = if i < normals { 1.5 } else { -1.0 };
        let features = (0..dim)
            .map(|_| center + rng.random_range(-1.0..1.0))
            .collect();
        let label = if i < normals {
            Label::Normal
        } else {
            Label::Abnormal
        };
        samples.push(LabeledSample::new(features, label));
    }
    samples
}

fn bench_forward(c: &mut Criterion) {
    let model = Autoencoder::seeded(Architecture::with_defaults(20), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
    c.bench_function("forward_d20_default_arch", |b| {
        b.iter(|| model.forward(black_box(&x)).unwrap())
    });
}

fn bench_contrastive_batch(c: &mut Criterion) {
    let model = Autoencoder::seeded(Architecture::with_defaults(20), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples = batch(&mut rng, 20, 48, 16);
    let mut tape = GradientTape::zeros_like(&model);
    let config = ContrastiveConfig::default();
    c.bench_function("contrastive_batch64_loss_and_grad", |b| {
        b.iter(|| {
            tape.zero();
            total_loss_with_tape(&model, black_box(&samples), config.temperature, &mut tape)
                .unwrap()
        })
    });
}

fn bench_adaptation_batch(c: &mut Criterion) {
    let model = Autoencoder::seeded(Architecture::with_defaults(20), 5).unwrap();
    let teacher = TeacherSnapshot::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let samples = batch(&mut rng, 20, 6, 2);
    let config = AdaptConfig::default();
    c.bench_function("adaptation_batch8_loss", |b| {
        b.iter(|| adaptation_loss(&model, &teacher, black_box(&samples), &config).unwrap())
    });
}

fn bench_permutation_test(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let old: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0)).collect();
    let new: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0f64).sqrt()).collect();
    let config = ShiftConfig {
        permutations: 200,
        ..ShiftConfig::default()
    };
    c.bench_function("permutation_test_500x500_200perms", |b| {
        b.iter(|| permutation_test(black_box(&old), black_box(&new), &config).unwrap())
    });
}

fn bench_explain_gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let old: Vec<f64> = (0..1000).map(|_| rng.random_range(0.6..1.0)).collect();
    let new: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..0.7)).collect();
    let m_old: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let m_new: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let config = ExplainConfig::default();
    c.bench_function("explain_objective_grad_2000_masks", |b| {
        b.iter(|| objective_grad(black_box(&m_old), black_box(&m_new), &old, &new, &config).unwrap())
    });
}

criterion_group!(
    benches,
    bench_forward,
    bench_contrastive_batch,
    bench_adaptation_batch,
    bench_permutation_test,
    bench_explain_gradient
);
criterion_main!(benches);
