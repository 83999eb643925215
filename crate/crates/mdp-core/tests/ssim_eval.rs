//! Dataset-level evaluation paths: mean SSIM against selected images, the
//! leak fingerprint, and small utility/transfer smoke checks.

use mdp_core::dataset::{assign_pairs, make_synthetic, ImageShape, PairingPolicy};
use mdp_core::error::Error;
use mdp_core::evaluate::{
    leak_fingerprint, mean_ssim, ssim, train_consumer, transfer_eval, utility_eval, SsimConfig,
};
use mdp_core::forge::{build_mdp_dataset, PgdConfig};
use mdp_core::model::{init_model, Architecture, ModelConfig, TrainConfig};
use proptest::prelude::*;

fn fixture(
    steps: u32,
) -> (mdp_core::dataset::Dataset, mdp_core::model::ModelParams, mdp_core::forge::ModifiedDataset)
{
    let shape = ImageShape::new(8, 8, 1);
    let ds = make_synthetic(2, 10, shape, 0.1, 4).unwrap();
    let model = init_model(ModelConfig::new(Architecture::ConvSmall, shape, 2), 8).unwrap();
    let pairing = assign_pairs(&ds, PairingPolicy::DifferentClass, 3).unwrap();
    let pgd = PgdConfig { steps, step_size: 0.02, ..PgdConfig::default() };
    let modified = build_mdp_dataset(&model, &ds, &pairing, &pgd).unwrap();
    (ds, model, modified)
}

#[test]
fn zero_step_forge_has_unit_ssim() {
    let (ds, _, modified) = fixture(0);
    let stats = mean_ssim(&modified, &ds, &SsimConfig::default()).unwrap();
    assert_eq!(stats.mean, 1.0);
    assert_eq!(stats.min, 1.0);
}

#[test]
fn perturbed_forge_keeps_ssim_high_but_below_one() {
    let (ds, _, modified) = fixture(25);
    let stats = mean_ssim(&modified, &ds, &SsimConfig::default()).unwrap();
    assert!(stats.mean < 1.0);
    assert!(stats.min <= stats.mean);
    assert!(stats.mean > 0.5, "epsilon-bounded noise should not destroy structure");
}

#[test]
fn dangling_selected_index_is_an_integrity_error() {
    let (ds, _, modified) = fixture(2);
    let (short, _) = ds.split_per_class(2).unwrap();
    // 4 images cannot resolve selected indices up to 19.
    let err = mean_ssim(&modified, &short, &SsimConfig::default());
    assert!(matches!(err, Err(Error::Integrity(_))));
}

#[test]
fn untrained_model_agreement_sits_near_chance() {
    let shape = ImageShape::new(8, 8, 1);
    let ds = make_synthetic(4, 50, shape, 0.2, 9).unwrap();
    let reference = init_model(ModelConfig::new(Architecture::ConvSmall, shape, 4), 2).unwrap();
    let pairing = assign_pairs(&ds, PairingPolicy::DifferentClass, 1).unwrap();
    let modified =
        build_mdp_dataset(&reference, &ds, &pairing, &PgdConfig { steps: 0, ..PgdConfig::default() })
            .unwrap();
    // A freshly initialized net knows nothing about the pairing; its
    // agreement with the distorted labels is chance-like.
    let suspect = init_model(ModelConfig::new(Architecture::ConvWide, shape, 4), 77).unwrap();
    let agreement = leak_fingerprint(&suspect, &modified).unwrap();
    assert!((agreement - 0.25).abs() < 0.2, "agreement {agreement} far from 1/K");
}

#[test]
fn leak_fingerprint_rejects_mismatched_models() {
    let (_, _, modified) = fixture(1);
    let other = init_model(ModelConfig::new(Architecture::ConvSmall, ImageShape::new(4, 4, 1), 2), 0)
        .unwrap();
    assert!(matches!(leak_fingerprint(&other, &modified), Err(Error::InvalidArgument(_))));
}

#[test]
fn transfer_eval_requires_two_architectures_and_matches_utility_eval() {
    let (ds, _, modified) = fixture(6);
    let tc = TrainConfig { epochs: 3, batch_size: 8, learning_rate: 0.05, momentum: 0.9, seed: 5 };
    let small = ModelConfig::new(Architecture::ConvSmall, ds.shape(), 2);
    let wide = ModelConfig::new(Architecture::ConvWide, ds.shape(), 2);

    assert!(matches!(
        transfer_eval(&modified, std::slice::from_ref(&small), &ds, &tc),
        Err(Error::InvalidArgument(_))
    ));

    let table = transfer_eval(&modified, &[small, wide], &ds, &tc).unwrap();
    assert_eq!(table.len(), 2);
    assert_eq!(table[0].architecture, "conv-small");
    // The forging architecture's row equals a direct utility_eval call.
    let direct = utility_eval(&modified, &ds, &small, &tc).unwrap();
    assert_eq!(table[0].accuracy, direct);
}

#[test]
fn consumer_training_never_reuses_reference_weights() {
    let (ds, reference, modified) = fixture(4);
    let tc = TrainConfig { epochs: 1, batch_size: 8, learning_rate: 0.01, momentum: 0.9, seed: 6 };
    let consumer =
        train_consumer(&modified, &ModelConfig::new(Architecture::ConvSmall, ds.shape(), 2), &tc)
            .unwrap();
    assert_ne!(consumer.weights_flat(), reference.weights_flat());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ssim_stays_in_range_and_symmetric(seed_a in 0u64..500, seed_b in 500u64..1000) {
        let shape = ImageShape::new(8, 8, 1);
        let a = make_synthetic(2, 1, shape, 0.4, seed_a).unwrap();
        let b = make_synthetic(2, 1, shape, 0.4, seed_b).unwrap();
        let cfg = SsimConfig::default();
        let ab = ssim(a.image(0), b.image(0), &cfg).unwrap();
        let ba = ssim(b.image(0), a.image(0), &cfg).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }
}
