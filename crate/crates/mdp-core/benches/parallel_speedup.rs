//! Compares the data-parallel forge and SSIM paths against a single-thread
//! run of the same code. With the `parallel` feature disabled the sequential
//! fallback is benchmarked on its own.

use criterion::{criterion_group, criterion_main, Criterion};

use mdp_core::dataset::{assign_pairs, make_synthetic, ImageShape, PairingPolicy};
use mdp_core::evaluate::{mean_ssim, SsimConfig};
use mdp_core::forge::{build_mdp_dataset, PgdConfig};
use mdp_core::model::{init_model, Architecture, ModelConfig};

fn forge_once() {
    let shape = ImageShape::new(16, 16, 1);
    let ds = make_synthetic(3, 24, shape, 0.1, 11).unwrap();
    let model = init_model(ModelConfig::new(Architecture::ConvSmall, shape, 3), 1).unwrap();
    let pairing = assign_pairs(&ds, PairingPolicy::DifferentClass, 5).unwrap();
    let cfg = PgdConfig { steps: 20, step_size: 0.02, ..PgdConfig::default() };
    let modified = build_mdp_dataset(&model, &ds, &pairing, &cfg).unwrap();
    assert_eq!(modified.len(), ds.len());
}

fn ssim_once() {
    let shape = ImageShape::new(16, 16, 1);
    let ds = make_synthetic(3, 40, shape, 0.1, 3).unwrap();
    let model = init_model(ModelConfig::new(Architecture::ConvSmall, shape, 3), 1).unwrap();
    let pairing = assign_pairs(&ds, PairingPolicy::DifferentClass, 5).unwrap();
    let cfg = PgdConfig { steps: 2, step_size: 0.02, ..PgdConfig::default() };
    let modified = build_mdp_dataset(&model, &ds, &pairing, &cfg).unwrap();
    let stats = mean_ssim(&modified, &ds, &SsimConfig::default()).unwrap();
    assert!(stats.mean <= 1.0);
}

#[cfg(feature = "parallel")]
fn bench_forge(c: &mut Criterion) {
    let mut group = c.benchmark_group("forge");
    group.sample_size(10);

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    group.bench_function("sequential", |b| b.iter(|| single.install(forge_once)));
    group.bench_function("parallel", |b| b.iter(forge_once));
    group.finish();

    let mut group = c.benchmark_group("mean_ssim");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| single.install(ssim_once)));
    group.bench_function("parallel", |b| b.iter(ssim_once));
    group.finish();
}

#[cfg(not(feature = "parallel"))]
fn bench_forge(c: &mut Criterion) {
    let mut group = c.benchmark_group("forge");
    group.sample_size(10);
    group.bench_function("sequential-fallback", |b| b.iter(forge_once));
    group.finish();

    let mut group = c.benchmark_group("mean_ssim");
    group.sample_size(10);
    group.bench_function("sequential-fallback", |b| b.iter(ssim_once));
    group.finish();
}

criterion_group!(benches, bench_forge);
criterion_main!(benches);
