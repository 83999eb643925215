//! Construction of mapping-distorted datasets: per-example PGD feature
//! matching, whole-dataset forging, and the T-fold augmented variant.
//!
//! Each modified image starts at its selected image and walks sign-gradient
//! steps that shrink the feature distance to its target image, projected onto
//! the l-inf ball around the selected image (when a budget is set) and onto
//! [0, 1] always. The best iterate seen (including the start) is returned, so
//! `final_distance <= initial_distance` holds by construction.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    assign_pairs, write_manifest, Dataset, Image, ImageShape, LabeledImage, Metadata,
    PairAssignment, PairingPolicy,
};
use crate::error::{Error, FormatErrorKind, Result};
use crate::format::{ByteReader, ByteWriter, VERSION_MODIFIED};
use crate::model::ModelParams;
use crate::par;
use crate::pipeline::{derive_seed, sha256_hex};

/// Order of the feature-distance norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    L2,
    LInf,
}

impl Default for DistanceKind {
    fn default() -> Self {
        DistanceKind::L2
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceKind::L2 => write!(f, "l2"),
            DistanceKind::LInf => write!(f, "linf"),
        }
    }
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "2" | "l2" => Ok(DistanceKind::L2),
            "inf" | "linf" => Ok(DistanceKind::LInf),
            other => Err(format!("unknown distance order `{other}` (expected 2 or inf)")),
        }
    }
}

/// The p-norm of `a - b`; zero iff the vectors are equal.
pub fn feature_distance(a: &[f64], b: &[f64], kind: DistanceKind) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "feature dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let d = match kind {
        DistanceKind::L2 => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        DistanceKind::LInf => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (x - y).abs())
            .fold(0.0, f64::max),
    };
    Ok(d)
}

/// Default l-inf pixel budget around the selected image.
pub const DEFAULT_EPSILON: f64 = 8.0 / 255.0;

/// PGD settings. `epsilon: None` removes the ball constraint and leaves only
/// the [0, 1] box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgdConfig {
    pub steps: u32,
    pub step_size: f64,
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub distance: DistanceKind,
    /// Sign-gradient steps (l-inf steepest descent) when true; plain gradient
    /// steps otherwise.
    #[serde(default = "default_sign_steps")]
    pub sign_steps: bool,
}

fn default_sign_steps() -> bool {
    true
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            steps: 100,
            step_size: 0.1,
            epsilon: Some(DEFAULT_EPSILON),
            distance: DistanceKind::L2,
            sign_steps: true,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(Error::InvalidArgument(format!("invalid step size {}", self.step_size)));
        }
        if let Some(eps) = self.epsilon {
            if !eps.is_finite() || eps <= 0.0 {
                return Err(Error::InvalidArgument(format!("invalid epsilon {eps}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one PGD run, before provenance indices are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdResult {
    pub image: Image,
    pub initial_distance: f64,
    pub final_distance: f64,
}

/// A forged example: the modified image carries the target image's label and
/// remembers where both sides of the pairing came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedExample {
    pub image: Image,
    pub target_label: u32,
    pub selected_index: usize,
    pub target_index: usize,
    pub initial_distance: f64,
    pub final_distance: f64,
}

/// A forged dataset (one or more passes over the source).
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedDataset {
    examples: Vec<ModifiedExample>,
    shape: ImageShape,
    num_classes: usize,
    source_hash: String,
    pgd: PgdConfig,
    policy: PairingPolicy,
    pass_seeds: Vec<u64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Round to f32 storage precision while staying exactly representable.
fn quantize(v: f64) -> f64 {
    f64::from(v as f32)
}

/// Runs PGD from `selected` toward `target_features`, returning the best
/// iterate seen (the start included).
fn run_pgd(
    params: &ModelParams,
    selected: &Image,
    target_features: &[f64],
    cfg: &PgdConfig,
) -> Result<PgdResult> {
    cfg.validate()?;
    let shape = selected.shape();
    let anchor = selected.pixels();

    let initial_features = params.forward_features(selected)?;
    let initial_distance = feature_distance(&initial_features, target_features, cfg.distance)?;

    let mut current: Vec<f32> = anchor.to_vec();
    let mut best = current.clone();
    let mut best_distance = initial_distance;

    for _ in 0..cfg.steps {
        let image = Image::from_clamped(shape, current.clone());
        let grad = params.input_gradient(&image, target_features, cfg.distance)?;
        for (i, g) in grad.iter().enumerate() {
            let delta = if cfg.sign_steps {
                -cfg.step_size * sign(*g)
            } else {
                -cfg.step_size * *g
            };
            let mut v = f64::from(current[i]) + delta;
            if let Some(eps) = cfg.epsilon {
                let center = f64::from(anchor[i]);
                v = v.clamp(center - eps, center + eps);
            }
            current[i] = (v.clamp(0.0, 1.0) as f32).clamp(0.0, 1.0);
        }
        let image = Image::from_clamped(shape, current.clone());
        let features = params.forward_features(&image)?;
        let distance = feature_distance(&features, target_features, cfg.distance)?;
        if distance < best_distance {
            best_distance = distance;
            best.copy_from_slice(&current);
        }
    }

    Ok(PgdResult {
        image: Image::from_clamped(shape, best),
        initial_distance: quantize(initial_distance),
        final_distance: quantize(best_distance),
    })
}

/// Forges one modified image: starts at `selected`, matches the deep features
/// of `target` under the PGD config.
pub fn pgd_feature_match(
    params: &ModelParams,
    selected: &Image,
    target: &Image,
    cfg: &PgdConfig,
) -> Result<PgdResult> {
    let target_features = params.forward_features(target)?;
    run_pgd(params, selected, &target_features, cfg)
}

fn check_model_dataset(params: &ModelParams, dataset: &Dataset) -> Result<()> {
    if params.config().input_shape != dataset.shape() {
        return Err(Error::InvalidArgument(format!(
            "model input {} does not match dataset shape {}",
            params.config().input_shape,
            dataset.shape()
        )));
    }
    if params.config().num_classes != dataset.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "model has {} classes, dataset {}",
            params.config().num_classes,
            dataset.num_classes()
        )));
    }
    Ok(())
}

fn forge_pass(
    params: &ModelParams,
    dataset: &Dataset,
    pairing: &PairAssignment,
    cfg: &PgdConfig,
    target_features: &[Vec<f64>],
) -> Result<Vec<ModifiedExample>> {
    pairing.validate_for(dataset)?;
    let outcomes = par::map_indexed(dataset.len(), |i| {
        let pair = pairing.pairs[i];
        run_pgd(params, dataset.image(pair.selected), &target_features[i], cfg)
            .map(|r| ModifiedExample {
                image: r.image,
                target_label: dataset.label(i),
                selected_index: pair.selected,
                target_index: i,
                initial_distance: r.initial_distance,
                final_distance: r.final_distance,
            })
    });
    let mut examples = Vec::with_capacity(outcomes.len());
    for (i, outcome) in outcomes.into_iter().enumerate() {
        examples.push(outcome.map_err(|e| Error::Example { index: i, source: Box::new(e) })?);
    }
    Ok(examples)
}

fn all_target_features(params: &ModelParams, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    let feats = par::map_indexed(dataset.len(), |i| params.forward_features(dataset.image(i)));
    feats
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.map_err(|e| Error::Example { index: i, source: Box::new(e) }))
        .collect()
}

/// Forges one modified example per pair, in target-index order. Per-example
/// work is independent and may run in parallel; output does not depend on
/// scheduling.
pub fn build_mdp_dataset(
    params: &ModelParams,
    dataset: &Dataset,
    pairing: &PairAssignment,
    cfg: &PgdConfig,
) -> Result<ModifiedDataset> {
    cfg.validate()?;
    check_model_dataset(params, dataset)?;
    let target_features = all_target_features(params, dataset)?;
    let examples = forge_pass(params, dataset, pairing, cfg, &target_features)?;
    Ok(ModifiedDataset {
        examples,
        shape: dataset.shape(),
        num_classes: dataset.num_classes(),
        source_hash: dataset.content_hash()?,
        pgd: *cfg,
        policy: pairing.policy,
        pass_seeds: vec![pairing.seed],
    })
}

/// Runs `passes` independent forging passes; pass `t` uses the pairing seed
/// `derive_seed(seed, "pass/t")`. The result is the concatenation of the
/// passes, so its size is exactly `passes * dataset.len()`, and a single pass
/// is bit-identical to [`build_mdp_dataset`] under the derived seed.
pub fn build_augmented_dataset(
    params: &ModelParams,
    dataset: &Dataset,
    policy: PairingPolicy,
    passes: u32,
    cfg: &PgdConfig,
    seed: u64,
) -> Result<ModifiedDataset> {
    if passes < 1 {
        return Err(Error::InvalidArgument(format!(
            "augmentation needs at least one pass, got {passes}"
        )));
    }
    cfg.validate()?;
    check_model_dataset(params, dataset)?;
    let target_features = all_target_features(params, dataset)?;

    let mut examples = Vec::with_capacity(passes as usize * dataset.len());
    let mut pass_seeds = Vec::with_capacity(passes as usize);
    for t in 1..=passes {
        let pass_seed = derive_seed(seed, &format!("pass/{t}"));
        let pairing = assign_pairs(dataset, policy, pass_seed)?;
        examples.extend(forge_pass(params, dataset, &pairing, cfg, &target_features)?);
        pass_seeds.push(pass_seed);
    }
    Ok(ModifiedDataset {
        examples,
        shape: dataset.shape(),
        num_classes: dataset.num_classes(),
        source_hash: dataset.content_hash()?,
        pgd: *cfg,
        policy,
        pass_seeds,
    })
}

#[derive(Serialize, Deserialize)]
struct ModifiedMeta {
    kind: String,
    source_hash: String,
    pgd: PgdConfig,
    pairing_policy: PairingPolicy,
    pass_seeds: Vec<u64>,
}

impl ModifiedDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[ModifiedExample] {
        &self.examples
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    pub fn pgd_config(&self) -> &PgdConfig {
        &self.pgd
    }

    pub fn pairing_policy(&self) -> PairingPolicy {
        self.policy
    }

    pub fn pass_seeds(&self) -> &[u64] {
        &self.pass_seeds
    }

    pub fn passes(&self) -> usize {
        self.pass_seeds.len()
    }

    pub fn mean_initial_distance(&self) -> f64 {
        self.examples.iter().map(|e| e.initial_distance).sum::<f64>() / self.examples.len() as f64
    }

    pub fn mean_final_distance(&self) -> f64 {
        self.examples.iter().map(|e| e.final_distance).sum::<f64>() / self.examples.len() as f64
    }

    /// View as a plain training dataset: (modified image, target label).
    pub fn to_training_dataset(&self) -> Result<Dataset> {
        let images: Vec<LabeledImage> = self
            .examples
            .iter()
            .map(|e| LabeledImage { image: e.image.clone(), label: e.target_label })
            .collect();
        let mut provenance = Metadata::new();
        provenance.insert("generator".into(), "mdp-forge".into());
        provenance.insert("source_hash".into(), self.source_hash.clone().into());
        provenance.insert("passes".into(), (self.pass_seeds.len() as u64).into());
        Dataset::new(images, self.num_classes, provenance)
    }

    fn metadata(&self) -> Result<Metadata> {
        let meta = ModifiedMeta {
            kind: "modified".into(),
            source_hash: self.source_hash.clone(),
            pgd: self.pgd,
            pairing_policy: self.policy,
            pass_seeds: self.pass_seeds.clone(),
        };
        match serde_json::to_value(&meta)? {
            serde_json::Value::Object(map) => Ok(map),
            _ => unreachable!("struct serializes to an object"),
        }
    }

    /// Serializes to the version-2 MDPD layout (pixel/label block plus the
    /// four provenance arrays, then metadata).
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = u32::try_from(self.examples.len())
            .map_err(|_| Error::InvalidArgument("modified dataset too large for u32".into()))?;
        let mut w = ByteWriter::new();
        w.push_magic();
        w.push_u8(VERSION_MODIFIED);
        w.push_u32(n);
        w.push_u32(self.shape.height as u32);
        w.push_u32(self.shape.width as u32);
        w.push_u32(self.shape.channels as u32);
        w.push_u32(self.num_classes as u32);
        for e in &self.examples {
            w.push_f32_slice(e.image.pixels());
        }
        for e in &self.examples {
            w.push_u32(e.target_label);
        }
        for e in &self.examples {
            w.push_u32(e.selected_index as u32);
        }
        for e in &self.examples {
            w.push_u32(e.target_index as u32);
        }
        for e in &self.examples {
            w.push_f32(e.initial_distance as f32);
        }
        for e in &self.examples {
            w.push_f32(e.final_distance as f32);
        }
        w.push_metadata(&self.metadata()?)?;
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8], source_name: &str) -> Result<Self> {
        let mut r = ByteReader::new(bytes, source_name);
        r.expect_magic()?;
        r.expect_version(VERSION_MODIFIED)?;
        let (images, num_classes, shape) = crate::dataset::read_image_block(&mut r)?;
        let n = images.len();
        let selected = r.read_u32_array(n)?;
        let target = r.read_u32_array(n)?;
        let initial_offset = r.offset();
        let initial = r.read_f32_array(n)?;
        let final_offset = r.offset();
        let final_ = r.read_f32_array(n)?;
        let meta_map = r.read_metadata()?;
        r.finish()?;

        let meta: ModifiedMeta =
            serde_json::from_value(serde_json::Value::Object(meta_map)).map_err(|e| {
                r.error_at(0, FormatErrorKind::CorruptMetadata { detail: e.to_string() })
            })?;
        if meta.pass_seeds.is_empty() || n % meta.pass_seeds.len() != 0 {
            return Err(r.error_at(
                0,
                FormatErrorKind::InvalidField {
                    detail: format!(
                        "{} examples cannot split into {} passes",
                        n,
                        meta.pass_seeds.len()
                    ),
                },
            ));
        }
        let source_len = n / meta.pass_seeds.len();

        let mut examples = Vec::with_capacity(n);
        for (i, li) in images.into_iter().enumerate() {
            if selected[i] as usize >= source_len || target[i] as usize >= source_len {
                return Err(r.error_at(
                    0,
                    FormatErrorKind::InvalidField {
                        detail: format!(
                            "example {i} references source index out of range (selected {}, target {}, source size {source_len})",
                            selected[i], target[i]
                        ),
                    },
                ));
            }
            for (value, offset) in
                [(initial[i], initial_offset + 4 * i as u64), (final_[i], final_offset + 4 * i as u64)]
            {
                if !value.is_finite() || value < 0.0 {
                    return Err(r.error_at(
                        offset,
                        FormatErrorKind::InvalidField {
                            detail: format!("distance {value} is not a finite non-negative number"),
                        },
                    ));
                }
            }
            if final_[i] > initial[i] {
                return Err(r.error_at(
                    final_offset + 4 * i as u64,
                    FormatErrorKind::InvalidField {
                        detail: format!(
                            "example {i} has final distance {} above initial {}",
                            final_[i], initial[i]
                        ),
                    },
                ));
            }
            examples.push(ModifiedExample {
                image: li.image,
                target_label: li.label,
                selected_index: selected[i] as usize,
                target_index: target[i] as usize,
                initial_distance: f64::from(initial[i]),
                final_distance: f64::from(final_[i]),
            });
        }
        Ok(ModifiedDataset {
            examples,
            shape,
            num_classes,
            source_hash: meta.source_hash,
            pgd: meta.pgd,
            policy: meta.pairing_policy,
            pass_seeds: meta.pass_seeds,
        })
    }

    /// Writes the binary file plus its `.manifest.json` sidecar; returns the
    /// SHA-256 hex digest of the binary bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let bytes = self.to_bytes()?;
        let digest = sha256_hex(&bytes);
        std::fs::write(path.as_ref(), &bytes)?;
        write_manifest(path.as_ref(), &self.metadata()?)?;
        Ok(digest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        ModifiedDataset::from_bytes(&bytes, &path.as_ref().display().to_string())
    }

    pub fn content_hash(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_bytes()?))
    }
}
