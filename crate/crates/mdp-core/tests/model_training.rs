//! Training loop and gradient contracts: bitwise determinism, convergence on
//! a task the least-squares oracle proves solvable, finite-difference
//! gradient checks, and exact checkpoint round trips.

mod common;

use mdp_core::dataset::{make_synthetic, Dataset, Image, ImageShape, Metadata};
use mdp_core::forge::DistanceKind;
use mdp_core::model::{
    init_model, Architecture, FeatureLayer, ModelConfig, ModelParams, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn train_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig { epochs, batch_size: 16, learning_rate: 0.05, momentum: 0.9, seed }
}

#[test]
fn training_is_bitwise_deterministic_under_a_fixed_seed() {
    let ds = make_synthetic(2, 20, ImageShape::new(8, 8, 1), 0.1, 5).unwrap();
    let cfg = ModelConfig::new(Architecture::ConvSmall, ds.shape(), 2);
    let run = |seed| {
        let (m, h) = init_model(cfg, 3).unwrap().train(&ds, &train_cfg(4, seed)).unwrap();
        (m.weights_flat(), h)
    };
    let (wa, ha) = run(9);
    let (wb, hb) = run(9);
    let (wc, _) = run(10);
    assert_eq!(wa, wb);
    assert_eq!(ha, hb);
    assert_ne!(wa, wc);
}

#[test]
fn sgd_solves_a_task_the_least_squares_oracle_proves_solvable() {
    let ds = make_synthetic(2, 50, ImageShape::new(8, 8, 1), 0.1, 3).unwrap();
    // Establish solvability independently first.
    assert!(common::least_squares_train_accuracy(&ds) >= 0.99);

    let cfg = ModelConfig::new(Architecture::ConvSmall, ds.shape(), 2);
    let (_, history) = init_model(cfg, 1).unwrap().train(&ds, &train_cfg(20, 7)).unwrap();
    let final_acc = history.final_accuracy().unwrap();
    assert!(final_acc >= 0.95, "train accuracy only reached {final_acc}");
}

#[test]
fn history_accuracy_matches_a_fresh_evaluate_call() {
    let ds = make_synthetic(3, 10, ImageShape::new(8, 8, 1), 0.15, 2).unwrap();
    let cfg = ModelConfig::new(Architecture::ConvDeep, ds.shape(), 3);
    let (model, history) = init_model(cfg, 0).unwrap().train(&ds, &train_cfg(3, 1)).unwrap();
    assert_eq!(model.evaluate(&ds).unwrap(), history.final_accuracy().unwrap());
    assert_eq!(model.fingerprint().unwrap().final_loss, history.final_loss().unwrap());
}

#[test]
fn wide_model_memorizes_four_images_perfectly() {
    let ds = make_synthetic(2, 2, ImageShape::new(8, 8, 1), 0.3, 8).unwrap();
    assert_eq!(ds.len(), 4);
    let cfg = ModelConfig::new(Architecture::ConvWide, ds.shape(), 2);
    let tc = TrainConfig { epochs: 120, batch_size: 4, learning_rate: 0.05, momentum: 0.9, seed: 2 };
    let (model, _) = init_model(cfg, 4).unwrap().train(&ds, &tc).unwrap();
    assert_eq!(model.evaluate(&ds).unwrap(), 1.0);
}

#[test]
fn analytic_gradient_matches_central_differences_on_small_models() {
    let shape = ImageShape::new(4, 4, 1);
    for (case, arch) in [
        Architecture::ConvSmall,
        Architecture::ConvDeep,
        Architecture::ToyLinear,
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + case as u64);
        let model = init_model(ModelConfig::new(arch, shape, 2), 100 + case as u64).unwrap();
        let pixels: Vec<f32> = (0..16).map(|_| rng.gen_range(0.05..0.95)).collect();
        let probe: Vec<f32> = (0..16).map(|_| rng.gen_range(0.05..0.95)).collect();
        let image = Image::new(shape, pixels).unwrap();
        let target = model.forward_features(&Image::new(shape, probe).unwrap()).unwrap();

        let analytic = model.input_gradient(&image, &target, DistanceKind::L2).unwrap();
        let numeric = common::fd_input_gradient(&model, &image, &target, 1e-3);
        let err = common::relative_error(&analytic, &numeric);
        assert!(err < 1e-3, "{arch:?}: relative error {err}");
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let ds = make_synthetic(2, 10, ImageShape::new(8, 8, 1), 0.1, 1).unwrap();
    let mut cfg = ModelConfig::new(Architecture::ConvSmall, ds.shape(), 2);
    cfg.feature_layer = FeatureLayer::Last;
    let (model, _) = init_model(cfg, 12).unwrap().train(&ds, &train_cfg(2, 6)).unwrap();

    let digest = model.save(&path).unwrap();
    let loaded = ModelParams::load(&path).unwrap();
    assert_eq!(loaded.weights_flat(), model.weights_flat());
    assert_eq!(loaded.config(), model.config());
    assert_eq!(
        loaded.fingerprint().map(|f| (f.seed, f.epochs)),
        model.fingerprint().map(|f| (f.seed, f.epochs))
    );
    assert_eq!(loaded.to_bytes().unwrap(), model.to_bytes().unwrap());
    assert_eq!(mdp_core::pipeline::sha256_hex(&model.to_bytes().unwrap()), digest);

    // Same predictions after the round trip.
    assert_eq!(loaded.evaluate(&ds).unwrap(), model.evaluate(&ds).unwrap());
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let ds = make_synthetic(2, 4, ImageShape::new(8, 8, 1), 0.1, 1).unwrap();
    let cfg = ModelConfig::new(Architecture::ConvSmall, ds.shape(), 2);
    let model = init_model(cfg, 0).unwrap();
    let bytes = model.to_bytes().unwrap();
    let err = ModelParams::from_bytes(&bytes[..bytes.len() - 10], "cut.ckpt").unwrap_err();
    assert!(matches!(err, mdp_core::Error::Format { .. }));
}

#[test]
fn evaluate_rejects_mismatched_datasets() {
    let ds8 = make_synthetic(2, 4, ImageShape::new(8, 8, 1), 0.1, 1).unwrap();
    let ds4 = make_synthetic(2, 4, ImageShape::new(4, 4, 1), 0.1, 1).unwrap();
    let model = init_model(ModelConfig::new(Architecture::ConvSmall, ds8.shape(), 2), 0).unwrap();
    assert!(model.evaluate(&ds4).is_err());

    let ds3 = make_synthetic(3, 4, ImageShape::new(8, 8, 1), 0.1, 1).unwrap();
    assert!(model.evaluate(&ds3).is_err());
}

#[test]
fn divergent_training_reports_the_epoch() {
    // A linear model has no saturating activations, so an absurd learning
    // rate drives the f32 weights to overflow within a few batches.
    let ds = make_synthetic(2, 10, ImageShape::new(8, 8, 1), 0.1, 1).unwrap();
    let cfg = ModelConfig::new(Architecture::ToyLinear, ds.shape(), 2);
    let tc = TrainConfig { epochs: 30, batch_size: 4, learning_rate: 1e20, momentum: 0.9, seed: 0 };
    match init_model(cfg, 0).unwrap().train(&ds, &tc) {
        Err(mdp_core::Error::Training { epoch, .. }) => assert!(epoch >= 1),
        Err(mdp_core::Error::Numeric { .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn single_image_dataset_trains_without_panicking() {
    // Degenerate batch shapes.
    let full = make_synthetic(2, 1, ImageShape::new(8, 8, 1), 0.0, 0).unwrap();
    let one = Dataset::new(vec![full.images()[0].clone()], 2, Metadata::new()).unwrap();
    let cfg = ModelConfig::new(Architecture::ConvSmall, one.shape(), 2);
    let (model, history) = init_model(cfg, 0).unwrap().train(&one, &train_cfg(2, 0)).unwrap();
    assert_eq!(history.epochs.len(), 2);
    assert!(model.evaluate(&one).unwrap() >= 0.0);
}
