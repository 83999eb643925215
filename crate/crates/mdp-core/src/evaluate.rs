//! Measurement procedures: SSIM invisibility, utility of forged datasets
//! (train fresh on modified, test on clean), cross-architecture transfer, and
//! the distorted-mapping leak fingerprint.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Image, ImageShape};
use crate::error::{Error, Result};
use crate::forge::ModifiedDataset;
use crate::model::{init_model, ModelConfig, ModelParams, TrainConfig};
use crate::par;
use crate::pipeline::derive_seed;

/// Windowed SSIM settings. The canonical 11x11 / sigma 1.5 window only fits
/// images of at least 64px; small desk-scale images default to 7x7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig { window: 7, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

impl SsimConfig {
    /// Window 11 for images of 64px and up, 7 otherwise.
    pub fn for_shape(shape: ImageShape) -> Self {
        let window = if shape.height.min(shape.width) >= 64 { 11 } else { 7 };
        SsimConfig { window, ..SsimConfig::default() }
    }

    pub fn with_window(window: usize) -> Self {
        SsimConfig { window, ..SsimConfig::default() }
    }

    fn validate(&self, shape: ImageShape) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "SSIM window must be odd and positive, got {}",
                self.window
            )));
        }
        if self.window > shape.height.min(shape.width) {
            return Err(Error::InvalidArgument(format!(
                "SSIM window {} exceeds image extent {}",
                self.window, shape
            )));
        }
        if self.sigma <= 0.0 || self.k1 <= 0.0 || self.k2 <= 0.0 || self.dynamic_range <= 0.0 {
            return Err(Error::InvalidArgument("SSIM constants must be positive".into()));
        }
        Ok(())
    }

    fn kernel(&self) -> Vec<f64> {
        let n = self.window;
        let half = (n / 2) as f64;
        let mut k = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let dy = y as f64 - half;
                let dx = x as f64 - half;
                k.push((-(dy * dy + dx * dx) / (2.0 * self.sigma * self.sigma)).exp());
            }
        }
        let sum: f64 = k.iter().sum();
        for v in &mut k {
            *v /= sum;
        }
        k
    }
}

/// Mean structural similarity over all valid window positions and channels.
/// Exactly 1.0 for bitwise-identical images; symmetric in its arguments.
pub fn ssim(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs matching shapes, got {} and {}",
            a.shape(),
            b.shape()
        )));
    }
    let shape = a.shape();
    cfg.validate(shape)?;

    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let kernel = cfg.kernel();
    let n = cfg.window;
    let (h, w, ch) = (shape.height, shape.width, shape.channels);

    let mut total = 0.0f64;
    let mut count = 0usize;
    for c in 0..ch {
        for y0 in 0..=(h - n) {
            for x0 in 0..=(w - n) {
                let mut mu_a = 0.0f64;
                let mut mu_b = 0.0f64;
                for ky in 0..n {
                    for kx in 0..n {
                        let weight = kernel[ky * n + kx];
                        mu_a += weight * f64::from(a.get(y0 + ky, x0 + kx, c));
                        mu_b += weight * f64::from(b.get(y0 + ky, x0 + kx, c));
                    }
                }
                let mut var_a = 0.0f64;
                let mut var_b = 0.0f64;
                let mut cov = 0.0f64;
                for ky in 0..n {
                    for kx in 0..n {
                        let weight = kernel[ky * n + kx];
                        let da = f64::from(a.get(y0 + ky, x0 + kx, c)) - mu_a;
                        let db = f64::from(b.get(y0 + ky, x0 + kx, c)) - mu_b;
                        var_a += weight * (da * da);
                        var_b += weight * (db * db);
                        // Grouped so the product is symmetric in (a, b) at the
                        // bit level.
                        cov += weight * (da * db);
                    }
                }
                let numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                let denominator = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                total += (numerator / denominator).clamp(-1.0, 1.0);
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimStats {
    pub mean: f64,
    pub min: f64,
}

/// SSIM between every modified image and its *selected* source image (the
/// invisibility claim is about resembling the selected image).
pub fn mean_ssim(
    modified: &ModifiedDataset,
    source: &Dataset,
    cfg: &SsimConfig,
) -> Result<SsimStats> {
    for (i, e) in modified.examples().iter().enumerate() {
        if e.selected_index >= source.len() {
            return Err(Error::Integrity(format!(
                "example {i} selects source index {} but the source has {} images",
                e.selected_index,
                source.len()
            )));
        }
    }
    let values = par::map_indexed(modified.len(), |i| {
        let e = &modified.examples()[i];
        ssim(&e.image, source.image(e.selected_index), cfg)
    });
    let mut sum = 0.0f64;
    let mut min = f64::INFINITY;
    for v in values {
        let v = v?;
        sum += v;
        min = min.min(v);
    }
    Ok(SsimStats { mean: sum / modified.len() as f64, min })
}

/// Trains a fresh consumer model (never reusing reference weights) on the
/// (modified image, target label) pairs.
pub fn train_consumer(
    modified: &ModifiedDataset,
    arch: &ModelConfig,
    tc: &TrainConfig,
) -> Result<ModelParams> {
    let training = modified.to_training_dataset()?;
    let fresh = init_model(*arch, derive_seed(tc.seed, "consumer-init"))?;
    let (trained, _history) = fresh.train(&training, tc)?;
    Ok(trained)
}

/// Clean-test accuracy of a fresh model trained on the modified dataset.
pub fn utility_eval(
    modified: &ModifiedDataset,
    test: &Dataset,
    arch: &ModelConfig,
    tc: &TrainConfig,
) -> Result<f64> {
    let model = train_consumer(modified, arch, tc)?;
    model.evaluate(test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferEntry {
    pub architecture: String,
    pub accuracy: f64,
}

/// Utility evaluation per architecture; the forging architecture is expected
/// to be in the list so the table is self-contained.
pub fn transfer_eval(
    modified: &ModifiedDataset,
    archs: &[ModelConfig],
    test: &Dataset,
    tc: &TrainConfig,
) -> Result<Vec<TransferEntry>> {
    if archs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "transfer evaluation needs at least 2 architectures, got {}",
            archs.len()
        )));
    }
    archs
        .iter()
        .map(|arch| {
            utility_eval(modified, test, arch, tc).map(|accuracy| TransferEntry {
                architecture: arch.arch.to_string(),
                accuracy,
            })
        })
        .collect()
}

/// Fraction of modified images on which the suspect model reproduces the
/// distorted target label. High agreement fingerprints training on the leaked
/// modified dataset.
pub fn leak_fingerprint(suspect: &ModelParams, modified: &ModifiedDataset) -> Result<f64> {
    if suspect.config().input_shape != modified.shape() {
        return Err(Error::InvalidArgument(format!(
            "suspect model input {} does not match modified dataset shape {}",
            suspect.config().input_shape,
            modified.shape()
        )));
    }
    if suspect.config().num_classes != modified.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "suspect model has {} classes, modified dataset {}",
            suspect.config().num_classes,
            modified.num_classes()
        )));
    }
    let hits = par::map_indexed(modified.len(), |i| {
        let e = &modified.examples()[i];
        suspect.predict(&e.image).map(|p| p == e.target_label as usize)
    });
    let mut correct = 0usize;
    for h in hits {
        if h? {
            correct += 1;
        }
    }
    Ok(correct as f64 / modified.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakReport {
    pub trained_on_modified: f64,
    pub trained_on_clean: f64,
    pub margin: f64,
}

/// Aggregate results of one experiment. Serialized as pretty JSON with the
/// field order below, which is stable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clean_baseline_accuracy: f64,
    pub modified_trained_accuracy: f64,
    pub ssim_mean: f64,
    pub ssim_min: f64,
    pub transfer: Vec<TransferEntry>,
    pub leak: LeakReport,
    pub seeds: BTreeMap<String, u64>,
    pub configs: serde_json::Value,
    pub artifacts: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn validate_ranges(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Integrity(format!("{name} = {v} outside [0, 1]")));
            }
            Ok(())
        };
        unit("clean_baseline_accuracy", self.clean_baseline_accuracy)?;
        unit("modified_trained_accuracy", self.modified_trained_accuracy)?;
        unit("leak.trained_on_modified", self.leak.trained_on_modified)?;
        unit("leak.trained_on_clean", self.leak.trained_on_clean)?;
        for t in &self.transfer {
            unit(&format!("transfer.{}", t.architecture), t.accuracy)?;
        }
        for (name, v) in [("ssim_mean", self.ssim_mean), ("ssim_min", self.ssim_min)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Integrity(format!("{name} = {v} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Aligned plain-text rendering for terminal output.
    pub fn render_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("clean-baseline accuracy".into(), format!("{:.4}", self.clean_baseline_accuracy)),
            ("modified-trained accuracy".into(), format!("{:.4}", self.modified_trained_accuracy)),
            ("ssim mean".into(), format!("{:.4}", self.ssim_mean)),
            ("ssim min".into(), format!("{:.4}", self.ssim_min)),
        ];
        for t in &self.transfer {
            rows.push((format!("transfer {}", t.architecture), format!("{:.4}", t.accuracy)));
        }
        rows.push(("leak trained-on-modified".into(), format!("{:.4}", self.leak.trained_on_modified)));
        rows.push(("leak trained-on-clean".into(), format!("{:.4}", self.leak.trained_on_clean)));
        rows.push(("leak margin".into(), format!("{:.4}", self.leak.margin)));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        out
    }
}
