//! Experiment orchestration: seed bookkeeping, content hashing, and the
//! end-to-end recipe (generate/load data, train the reference model, forge,
//! retrain consumers, evaluate, persist everything with provenance hashes).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{make_synthetic, Dataset, ImageShape, PairingPolicy};
use crate::error::{Error, Result};
use crate::evaluate::{
    leak_fingerprint, mean_ssim, train_consumer, utility_eval, EvalReport, LeakReport,
    SsimConfig, TransferEntry,
};
use crate::forge::{build_augmented_dataset, ModifiedDataset, PgdConfig};
use crate::model::{init_model, Architecture, FeatureLayer, ModelConfig, ModelParams, TrainConfig};

/// Derives a sub-seed from a master seed and a textual label.
///
/// Algorithm (stable across releases, documented so other implementations can
/// reproduce it): SHA-256 over the 8 little-endian bytes of `master` followed
/// by the UTF-8 bytes of `label`; the first 8 digest bytes, read little-endian,
/// form the result.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// Lowercase hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Generate with [`make_synthetic`] and split per class; the train split
    /// is what gets forged.
    Synthetic {
        classes: usize,
        per_class_train: usize,
        per_class_test: usize,
        height: usize,
        width: usize,
        channels: usize,
        noise_level: f64,
    },
    /// Pre-split datasets on disk (MDPD files).
    Files { train: PathBuf, test: PathBuf },
}

/// SGD hyperparameters without a seed; the pipeline derives every sub-seed
/// from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdHyperparams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl SgdHyperparams {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            seed,
        }
    }
}

/// Full experiment recipe. One JSON document, one master seed, one output
/// directory; everything else is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub reference_arch: Architecture,
    #[serde(default)]
    pub feature_layer: FeatureLayer,
    pub reference_train: SgdHyperparams,
    pub consumer_train: SgdHyperparams,
    pub pgd: PgdConfig,
    #[serde(default)]
    pub pairing_policy: PairingPolicy,
    /// Alg-style augmentation factor T; 1 builds a plain modified dataset.
    pub augmentation_passes: u32,
    /// Architectures evaluated in addition to the forging architecture.
    pub transfer_archs: Vec<Architecture>,
    /// SSIM window override; picked from the image size when absent.
    #[serde(default)]
    pub ssim_window: Option<usize>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// The default desk-scale recipe: 3-class synthetic data at 16x16, a
    /// conv-small reference, epsilon 8/255 forging, and the two remaining
    /// conv family members for transfer.
    pub fn desk_default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                classes: 3,
                per_class_train: 350,
                per_class_test: 50,
                height: 16,
                width: 16,
                channels: 1,
                noise_level: 0.1,
            },
            reference_arch: Architecture::ConvSmall,
            feature_layer: FeatureLayer::Penultimate,
            reference_train: SgdHyperparams {
                epochs: 15,
                batch_size: 32,
                learning_rate: 0.05,
                momentum: 0.9,
            },
            consumer_train: SgdHyperparams {
                epochs: 20,
                batch_size: 32,
                learning_rate: 0.05,
                momentum: 0.9,
            },
            pgd: PgdConfig {
                steps: 40,
                step_size: 0.02,
                ..PgdConfig::default()
            },
            pairing_policy: PairingPolicy::DifferentClass,
            augmentation_passes: 1,
            transfer_archs: vec![Architecture::ConvWide, Architecture::ConvDeep],
            ssim_window: None,
            master_seed: 1,
            output_dir: PathBuf::from("out/desk-default"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.dataset {
            DatasetSource::Synthetic {
                classes,
                per_class_train,
                per_class_test,
                height,
                width,
                channels,
                noise_level,
            } => {
                if *classes < 2 {
                    return Err(Error::Config("synthetic dataset needs at least 2 classes".into()));
                }
                if *per_class_train == 0 || *per_class_test == 0 {
                    return Err(Error::Config(
                        "synthetic dataset needs positive train and test counts".into(),
                    ));
                }
                ImageShape::new(*height, *width, *channels)
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
                if !noise_level.is_finite() || *noise_level < 0.0 {
                    return Err(Error::Config(format!("invalid noise level {noise_level}")));
                }
            }
            DatasetSource::Files { .. } => {}
        }
        self.pgd.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.augmentation_passes < 1 {
            return Err(Error::Config("augmentation_passes must be at least 1".into()));
        }
        if let Some(w) = self.ssim_window {
            if w == 0 || w % 2 == 0 {
                return Err(Error::Config(format!("ssim_window must be odd, got {w}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Removes the lock file when the experiment ends, success or not.
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn stage<T>(name: &str, outdir: &Path, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| {
        let _ = std::fs::write(outdir.join("FAILED"), format!("{name}: {e}\n"));
        Error::Stage { stage: name.to_string(), source: Box::new(e) }
    })
}

/// Artifacts loaded back from a finished experiment directory.
pub struct ExperimentArtifacts {
    pub train: Dataset,
    pub test: Dataset,
    pub reference: ModelParams,
    pub modified: ModifiedDataset,
    pub report: EvalReport,
}

/// File names used inside an experiment output directory.
pub mod artifact_names {
    pub const TRAIN: &str = "train.mdpd";
    pub const TEST: &str = "test.mdpd";
    pub const MODIFIED: &str = "modified.mdpd";
    pub const REFERENCE: &str = "reference.ckpt";
    pub const REPORT: &str = "report.json";
}

/// Loads the five standard artifacts back from an output directory.
pub fn load_artifacts(dir: &Path) -> Result<ExperimentArtifacts> {
    let report_text = std::fs::read_to_string(dir.join(artifact_names::REPORT))?;
    let report: EvalReport =
        serde_json::from_str(&report_text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(ExperimentArtifacts {
        train: Dataset::load(dir.join(artifact_names::TRAIN))?,
        test: Dataset::load(dir.join(artifact_names::TEST))?,
        reference: ModelParams::load(dir.join(artifact_names::REFERENCE))?,
        modified: ModifiedDataset::load(dir.join(artifact_names::MODIFIED))?,
        report,
    })
}

/// Runs the full recipe: resolve data, split, train the reference model on
/// the clean train split, forge the modified dataset, persist every artifact
/// with its content hash, and evaluate utility, SSIM, transfer, and leak
/// fingerprints. Reruns with the same config produce byte-identical files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let outdir = cfg.output_dir.clone();
    std::fs::create_dir_all(&outdir)?;
    let _lock = LockGuard::acquire(&outdir)?;
    // A fresh run owns the directory; clear any stale failure marker.
    let _ = std::fs::remove_file(outdir.join("FAILED"));

    let master = cfg.master_seed;
    let mut seeds: BTreeMap<String, u64> = BTreeMap::new();
    seeds.insert("master".into(), master);

    let (train, test) = stage("dataset", &outdir, || match &cfg.dataset {
        DatasetSource::Synthetic {
            classes,
            per_class_train,
            per_class_test,
            height,
            width,
            channels,
            noise_level,
        } => {
            let seed = derive_seed(master, "dataset");
            seeds.insert("dataset".into(), seed);
            let full = make_synthetic(
                *classes,
                per_class_train + per_class_test,
                ImageShape::new(*height, *width, *channels),
                *noise_level,
                seed,
            )?;
            full.split_per_class(*per_class_train)
        }
        DatasetSource::Files { train, test } => {
            Ok((Dataset::load(train)?, Dataset::load(test)?))
        }
    })?;

    let mut artifacts: BTreeMap<String, String> = BTreeMap::new();
    stage("persist-input", &outdir, || {
        artifacts.insert(
            artifact_names::TRAIN.into(),
            train.save(outdir.join(artifact_names::TRAIN))?,
        );
        artifacts.insert(
            artifact_names::TEST.into(),
            test.save(outdir.join(artifact_names::TEST))?,
        );
        Ok(())
    })?;

    let reference_config = ModelConfig {
        arch: cfg.reference_arch,
        input_shape: train.shape(),
        num_classes: train.num_classes(),
        feature_layer: cfg.feature_layer,
    };

    let reference = stage("reference-train", &outdir, || {
        let init_seed = derive_seed(master, "reference-init");
        let train_seed = derive_seed(master, "reference-train");
        seeds.insert("reference-init".into(), init_seed);
        seeds.insert("reference-train".into(), train_seed);
        let fresh = init_model(reference_config, init_seed)?;
        let (trained, _history) =
            fresh.train(&train, &cfg.reference_train.with_seed(train_seed))?;
        artifacts.insert(
            artifact_names::REFERENCE.into(),
            trained.save(outdir.join(artifact_names::REFERENCE))?,
        );
        Ok(trained)
    })?;

    let modified = stage("forge", &outdir, || {
        let forge_seed = derive_seed(master, "forge");
        seeds.insert("forge".into(), forge_seed);
        let modified = build_augmented_dataset(
            &reference,
            &train,
            cfg.pairing_policy,
            cfg.augmentation_passes,
            &cfg.pgd,
            forge_seed,
        )?;
        artifacts.insert(
            artifact_names::MODIFIED.into(),
            modified.save(outdir.join(artifact_names::MODIFIED))?,
        );
        Ok(modified)
    })?;

    let report = stage("evaluate", &outdir, || {
        let ssim_cfg = match cfg.ssim_window {
            Some(w) => SsimConfig::with_window(w),
            None => SsimConfig::for_shape(train.shape()),
        };
        let stats = mean_ssim(&modified, &train, &ssim_cfg)?;

        let consumer_seed = derive_seed(master, "consumer-train");
        let clean_seed = derive_seed(master, "clean-baseline");
        seeds.insert("consumer-train".into(), consumer_seed);
        seeds.insert("clean-baseline".into(), clean_seed);
        let consumer_tc = cfg.consumer_train.with_seed(consumer_seed);

        // Consumer on the modified data (the forging architecture's row of
        // the transfer table) is also the leak suspect.
        let consumer = train_consumer(&modified, &reference_config, &consumer_tc)?;
        let modified_trained_accuracy = consumer.evaluate(&test)?;

        let mut transfer = vec![TransferEntry {
            architecture: cfg.reference_arch.to_string(),
            accuracy: modified_trained_accuracy,
        }];
        if !cfg.transfer_archs.is_empty() {
            let arch_configs: Vec<ModelConfig> = cfg
                .transfer_archs
                .iter()
                .map(|arch| ModelConfig { arch: *arch, ..reference_config })
                .collect();
            for arch_cfg in &arch_configs {
                let accuracy = utility_eval(&modified, &test, arch_cfg, &consumer_tc)?;
                transfer.push(TransferEntry {
                    architecture: arch_cfg.arch.to_string(),
                    accuracy,
                });
            }
        }

        // Clean baseline: fresh model on the original train split.
        let clean_tc = cfg.consumer_train.with_seed(clean_seed);
        let clean_init = init_model(reference_config, derive_seed(clean_seed, "consumer-init"))?;
        let (clean_model, _history) = clean_init.train(&train, &clean_tc)?;
        let clean_baseline_accuracy = clean_model.evaluate(&test)?;

        let leak_modified = leak_fingerprint(&consumer, &modified)?;
        let leak_clean = leak_fingerprint(&clean_model, &modified)?;

        let report = EvalReport {
            clean_baseline_accuracy,
            modified_trained_accuracy,
            ssim_mean: stats.mean,
            ssim_min: stats.min,
            transfer,
            leak: LeakReport {
                trained_on_modified: leak_modified,
                trained_on_clean: leak_clean,
                margin: leak_modified - leak_clean,
            },
            seeds: seeds.clone(),
            configs: serde_json::to_value(cfg)?,
            artifacts: artifacts.clone(),
        };
        report.validate_ranges()?;
        std::fs::write(outdir.join(artifact_names::REPORT), report.to_json_pretty()?)?;
        Ok(report)
    })?;

    Ok(report)
}
