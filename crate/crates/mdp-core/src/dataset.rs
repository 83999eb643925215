//! Data model, synthetic dataset generation, target/selected pairing, and
//! bit-exact persistence.
//!
//! Images are `f32` intensities in [0, 1], row-major `(h, w, c)`. A dataset
//! owns an ordered list of labeled images; the order is stable and persisted.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatErrorKind, Result};
use crate::format::{ByteReader, ByteWriter, VERSION_DATASET};
use crate::pipeline::{derive_seed, sha256_hex};

pub type Metadata = serde_json::Map<String, serde_json::Value>;

/// Height x width x channels of an image tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        ImageShape { height, width, channels }
    }

    /// Total number of scalar entries.
    pub fn pixel_count(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::InvalidArgument(format!("image shape {self} has a zero dimension")));
        }
        Ok(())
    }
}

impl fmt::Display for ImageShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// An image tensor with every value finite and in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: ImageShape,
    data: Vec<f32>,
}

impl Image {
    pub fn new(shape: ImageShape, data: Vec<f32>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.pixel_count() {
            return Err(Error::InvalidArgument(format!(
                "pixel buffer length {} does not match shape {shape}",
                data.len()
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "pixel {i} has value {v}, outside [0, 1]"
                )));
            }
        }
        Ok(Image { shape, data })
    }

    /// Constructor for pixel buffers already clamped to [0, 1].
    pub(crate) fn from_clamped(shape: ImageShape, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), shape.pixel_count());
        debug_assert!(data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        Image { shape, data }
    }

    pub fn constant(shape: ImageShape, value: f32) -> Result<Self> {
        let n = shape.pixel_count();
        Image::new(shape, vec![value; n])
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, h: usize, w: usize, c: usize) -> f32 {
        self.data[(h * self.shape.width + w) * self.shape.channels + c]
    }

    /// Largest absolute per-pixel difference to `other`.
    pub fn linf_distance(&self, other: &Image) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
            .fold(0.0, f64::max)
    }
}

/// An image plus its integer class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: u32,
}

/// Ordered collection of labeled images sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<LabeledImage>,
    num_classes: usize,
    shape: ImageShape,
    provenance: Metadata,
}

impl Dataset {
    pub fn new(images: Vec<LabeledImage>, num_classes: usize, provenance: Metadata) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::InvalidArgument("dataset must hold at least one image".into()));
        }
        if num_classes == 0 || num_classes > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("invalid class count {num_classes}")));
        }
        let shape = images[0].image.shape();
        for (i, li) in images.iter().enumerate() {
            if li.image.shape() != shape {
                return Err(Error::InvalidArgument(format!(
                    "image {i} has shape {}, expected {shape}",
                    li.image.shape()
                )));
            }
            if li.label as usize >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "image {i} has label {} but class count is {num_classes}",
                    li.label
                )));
            }
        }
        Ok(Dataset { images, num_classes, shape, provenance })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[LabeledImage] {
        &self.images
    }

    pub fn image(&self, index: usize) -> &Image {
        &self.images[index].image
    }

    pub fn label(&self, index: usize) -> u32 {
        self.images[index].label
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn provenance(&self) -> &Metadata {
        &self.provenance
    }

    /// Number of images per class, indexed by label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for li in &self.images {
            counts[li.label as usize] += 1;
        }
        counts
    }

    /// Splits off the first `train_per_class` images of every class (in
    /// dataset order) into a train set; the remainder becomes the test set.
    pub fn split_per_class(&self, train_per_class: usize) -> Result<(Dataset, Dataset)> {
        let mut taken = vec![0usize; self.num_classes];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for li in &self.images {
            let k = li.label as usize;
            if taken[k] < train_per_class {
                taken[k] += 1;
                train.push(li.clone());
            } else {
                test.push(li.clone());
            }
        }
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "split with {train_per_class} train images per class leaves an empty side"
            )));
        }
        let mut train_meta = self.provenance.clone();
        train_meta.insert("split".into(), "train".into());
        let mut test_meta = self.provenance.clone();
        test_meta.insert("split".into(), "test".into());
        Ok((
            Dataset::new(train, self.num_classes, train_meta)?,
            Dataset::new(test, self.num_classes, test_meta)?,
        ))
    }

    /// Serializes to the version-1 MDPD byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = u32::try_from(self.images.len())
            .map_err(|_| Error::InvalidArgument("dataset too large for u32 count".into()))?;
        let mut w = ByteWriter::new();
        w.push_magic();
        w.push_u8(VERSION_DATASET);
        w.push_u32(n);
        w.push_u32(self.shape.height as u32);
        w.push_u32(self.shape.width as u32);
        w.push_u32(self.shape.channels as u32);
        w.push_u32(self.num_classes as u32);
        for li in &self.images {
            w.push_f32_slice(li.image.pixels());
        }
        for li in &self.images {
            w.push_u32(li.label);
        }
        w.push_metadata(&self.provenance)?;
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8], source_name: &str) -> Result<Self> {
        let mut r = ByteReader::new(bytes, source_name);
        r.expect_magic()?;
        r.expect_version(VERSION_DATASET)?;
        let (images, num_classes, _shape) = read_image_block(&mut r)?;
        let provenance = r.read_metadata()?;
        r.finish()?;
        Dataset::new(images, num_classes, provenance)
    }

    /// Writes the binary file plus a `.manifest.json` sidecar; returns the
    /// SHA-256 hex digest of the binary bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let bytes = self.to_bytes()?;
        let digest = sha256_hex(&bytes);
        std::fs::write(path.as_ref(), &bytes)?;
        write_manifest(path.as_ref(), &self.provenance)?;
        Ok(digest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        Dataset::from_bytes(&bytes, &path.as_ref().display().to_string())
    }

    /// SHA-256 of the serialized bytes.
    pub fn content_hash(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_bytes()?))
    }
}

/// Shared by the plain and modified readers: header counts, pixels, labels.
pub(crate) fn read_image_block(
    r: &mut ByteReader<'_>,
) -> Result<(Vec<LabeledImage>, usize, ImageShape)> {
    let n_offset = r.offset();
    let n = r.read_u32()? as usize;
    let h = r.read_u32()? as usize;
    let w = r.read_u32()? as usize;
    let c = r.read_u32()? as usize;
    let k = r.read_u32()?;
    if n == 0 {
        return Err(r.error_at(
            n_offset,
            FormatErrorKind::InvalidField { detail: "image count is zero".into() },
        ));
    }
    let shape = ImageShape::new(h, w, c);
    if shape.validate().is_err() {
        return Err(r.error_at(
            n_offset + 4,
            FormatErrorKind::InvalidField { detail: format!("invalid shape {shape}") },
        ));
    }
    if k == 0 {
        return Err(r.error_at(
            n_offset + 16,
            FormatErrorKind::InvalidField { detail: "class count is zero".into() },
        ));
    }
    let per_image = shape.pixel_count();
    let mut pixel_blocks = Vec::with_capacity(n);
    for _ in 0..n {
        pixel_blocks.push(r.read_pixels(per_image)?);
    }
    let labels = r.read_labels(n, k)?;
    let images = pixel_blocks
        .into_iter()
        .zip(labels)
        .map(|(data, label)| LabeledImage { image: Image::from_clamped(shape, data), label })
        .collect();
    Ok((images, k as usize, shape))
}

pub(crate) fn write_manifest(binary_path: &Path, meta: &Metadata) -> Result<()> {
    let manifest_path = sidecar_path(binary_path);
    let text = serde_json::to_string_pretty(meta)?;
    std::fs::write(manifest_path, text + "\n")?;
    Ok(())
}

/// `foo.mdpd` -> `foo.mdpd.manifest.json`
pub fn sidecar_path(binary_path: &Path) -> std::path::PathBuf {
    let mut s = binary_path.as_os_str().to_os_string();
    s.push(".manifest.json");
    std::path::PathBuf::from(s)
}

/// Generates a deterministic synthetic dataset: every class gets a distinct
/// smooth two-wave pattern (derived from `seed` and the class id) and each
/// image adds i.i.d. uniform noise of half-width `noise_level`, clipped back
/// to [0, 1]. Images are ordered class-major.
pub fn make_synthetic(
    num_classes: usize,
    per_class: usize,
    shape: ImageShape,
    noise_level: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be positive".into()));
    }
    shape.validate()?;
    if !noise_level.is_finite() || noise_level < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid noise level {noise_level}")));
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "noise"));
    let mut images = Vec::with_capacity(num_classes * per_class);
    for class in 0..num_classes {
        let base = class_pattern(class, shape, seed);
        for _ in 0..per_class {
            let data: Vec<f32> = base
                .iter()
                .map(|&b| {
                    let v = if noise_level > 0.0 {
                        b + noise_rng.gen_range(-noise_level..=noise_level)
                    } else {
                        b
                    };
                    v.clamp(0.0, 1.0) as f32
                })
                .collect();
            images.push(LabeledImage {
                image: Image::from_clamped(shape, data),
                label: class as u32,
            });
        }
    }

    let mut provenance = Metadata::new();
    provenance.insert("generator".into(), "synthetic-two-wave-v1".into());
    provenance.insert("classes".into(), num_classes.into());
    provenance.insert("per_class".into(), per_class.into());
    provenance.insert("shape".into(), shape.to_string().into());
    provenance.insert("noise_level".into(), noise_level.into());
    provenance.insert("seed".into(), seed.into());
    Dataset::new(images, num_classes, provenance)
}

/// Amplitude of the smooth structure shared by all classes (two waves).
const SHARED_WAVE_AMP: (f64, f64) = (0.16, 0.10);
/// Amplitude of the class-specific smooth wave: the visible, stable feature.
/// Kept faint: if class appearance is too easy to learn, a consumer trained on
/// distorted labels learns to veto the visible class instead of reading the
/// injected texture.
const CLASS_WAVE_AMP: f64 = 0.05;
/// Amplitude of the class-specific per-pixel texture: the unstable feature.
/// Kept below half the default forging budget (8/255) so a bounded
/// perturbation can fully rewrite one class texture into another.
const CLASS_TEXTURE_AMP: f64 = 0.015;

struct Wave {
    freq: f64,
    cos: f64,
    sin: f64,
    phase: f64,
}

impl Wave {
    fn draw(rng: &mut ChaCha8Rng, freq_range: std::ops::Range<f64>) -> Self {
        use std::f64::consts::TAU;
        let freq = rng.gen_range(freq_range);
        let angle: f64 = rng.gen_range(0.0..TAU);
        let phase = rng.gen_range(0.0..TAU);
        Wave { freq, cos: angle.cos(), sin: angle.sin(), phase }
    }

    fn eval(&self, u: f64, v: f64, channel_shift: f64) -> f64 {
        use std::f64::consts::TAU;
        (TAU * self.freq * (u * self.cos + v * self.sin) + self.phase + channel_shift).sin()
    }
}

/// Deterministic class template with three layers: smooth waves shared by all
/// classes (scene structure), a weaker class-specific smooth wave (the
/// visible, stable class feature), and a class-specific per-pixel sign
/// texture (the invisible, unstable class feature). Values stay well inside
/// (0, 1) so per-image noise rarely clips.
fn class_pattern(class: usize, shape: ImageShape, seed: u64) -> Vec<f64> {
    use std::f64::consts::TAU;
    let mut shared_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shared-pattern"));
    let shared_a = Wave::draw(&mut shared_rng, 1.0..2.0);
    let shared_b = Wave::draw(&mut shared_rng, 2.0..3.5);

    let mut class_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("class-pattern/{class}")));
    let class_wave = Wave::draw(&mut class_rng, 1.5..3.0);

    let mut texture_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("class-texture/{class}")));

    let channel_shift = TAU / shape.channels as f64;
    let mut out = Vec::with_capacity(shape.pixel_count());
    for h in 0..shape.height {
        let u = h as f64 / shape.height as f64;
        for w in 0..shape.width {
            let v = w as f64 / shape.width as f64;
            for c in 0..shape.channels {
                let cs = c as f64 * channel_shift;
                let texture = if texture_rng.gen_bool(0.5) {
                    CLASS_TEXTURE_AMP
                } else {
                    -CLASS_TEXTURE_AMP
                };
                let val = 0.5
                    + SHARED_WAVE_AMP.0 * shared_a.eval(u, v, cs)
                    + SHARED_WAVE_AMP.1 * shared_b.eval(u, v, 0.5 * cs)
                    + CLASS_WAVE_AMP * class_wave.eval(u, v, cs)
                    + texture;
                out.push(val);
            }
        }
    }
    out
}

/// How selected images are drawn for each target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingPolicy {
    /// Any image of the dataset, the target itself included.
    Any,
    /// Only images whose label differs from the target's label.
    DifferentClass,
}

impl Default for PairingPolicy {
    fn default() -> Self {
        PairingPolicy::DifferentClass
    }
}

impl fmt::Display for PairingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairingPolicy::Any => write!(f, "any"),
            PairingPolicy::DifferentClass => write!(f, "different-class"),
        }
    }
}

impl FromStr for PairingPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "any" => Ok(PairingPolicy::Any),
            "different-class" => Ok(PairingPolicy::DifferentClass),
            other => Err(format!("unknown pairing policy `{other}` (expected `any` or `different-class`)")),
        }
    }
}

/// One (target, selected) correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub target: usize,
    pub selected: usize,
}

/// A full pairing: one selected image per target index, in target order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAssignment {
    pub pairs: Vec<Pair>,
    pub policy: PairingPolicy,
    pub seed: u64,
}

impl PairAssignment {
    /// Checks that this assignment is a valid cover of `dataset`: targets are
    /// exactly 0..N in order, selected indices resolve, and the policy holds.
    pub fn validate_for(&self, dataset: &Dataset) -> Result<()> {
        let n = dataset.len();
        if self.pairs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "pair list has {} entries for a dataset of {n}",
                self.pairs.len()
            )));
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            if pair.target != i {
                return Err(Error::InvalidArgument(format!(
                    "pair {i} targets index {}, expected {i}",
                    pair.target
                )));
            }
            if pair.selected >= n {
                return Err(Error::InvalidArgument(format!(
                    "pair {i} selects out-of-range index {}",
                    pair.selected
                )));
            }
            if self.policy == PairingPolicy::DifferentClass
                && dataset.label(pair.selected) == dataset.label(pair.target)
            {
                return Err(Error::InvalidArgument(format!(
                    "pair {i} violates different-class policy (label {})",
                    dataset.label(pair.target)
                )));
            }
        }
        Ok(())
    }
}

/// Draws one selected image per target index, uniformly from the policy's
/// candidate pool, with replacement across pairs. Fully determined by the
/// dataset order, the policy, and the seed.
pub fn assign_pairs(dataset: &Dataset, policy: PairingPolicy, seed: u64) -> Result<PairAssignment> {
    let n = dataset.len();
    let counts = dataset.class_counts();

    if policy == PairingPolicy::DifferentClass {
        let populated = counts.iter().filter(|&&c| c > 0).count();
        if populated < 2 {
            return Err(Error::InfeasiblePolicy(
                "different-class pairing needs at least 2 populated classes".into(),
            ));
        }
    }

    // Per-class index lists, in dataset order, for pool-skipping draws.
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, li) in dataset.images().iter().enumerate() {
        by_class[li.label as usize].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n);
    for target in 0..n {
        let selected = match policy {
            PairingPolicy::Any => rng.gen_range(0..n),
            PairingPolicy::DifferentClass => {
                let own = dataset.label(target) as usize;
                let pool = n - counts[own];
                let mut draw = rng.gen_range(0..pool);
                let mut chosen = None;
                for (class, members) in by_class.iter().enumerate() {
                    if class == own {
                        continue;
                    }
                    if draw < members.len() {
                        chosen = Some(members[draw]);
                        break;
                    }
                    draw -= members.len();
                }
                chosen.expect("draw below pool size always lands in a class")
            }
        };
        pairs.push(Pair { target, selected });
    }
    Ok(PairAssignment { pairs, policy, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_shape() -> ImageShape {
        ImageShape::new(8, 8, 1)
    }

    #[test]
    fn zero_noise_images_within_class_are_identical() {
        let ds = make_synthetic(2, 5, small_shape(), 0.0, 7).unwrap();
        assert_eq!(ds.len(), 10);
        let first = ds.image(0);
        for i in 1..5 {
            assert_eq!(ds.image(i), first);
        }
        assert_ne!(ds.image(5), first);
    }

    #[test]
    fn synthetic_generation_is_byte_deterministic() {
        let a = make_synthetic(3, 100, ImageShape::new(16, 16, 3), 0.1, 1).unwrap();
        let b = make_synthetic(3, 100, ImageShape::new(16, 16, 3), 0.1, 1).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }

    #[test]
    fn synthetic_rejects_bad_arguments() {
        assert!(matches!(
            make_synthetic(1, 5, small_shape(), 0.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            make_synthetic(2, 0, small_shape(), 0.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            make_synthetic(2, 5, ImageShape::new(0, 8, 1), 0.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            make_synthetic(2, 5, small_shape(), -0.5, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn single_class_different_class_pairing_is_infeasible() {
        // Two declared classes, but only class 0 is populated.
        let shape = small_shape();
        let images: Vec<LabeledImage> = (0..4)
            .map(|_| LabeledImage { image: Image::constant(shape, 0.5).unwrap(), label: 0 })
            .collect();
        let ds = Dataset::new(images, 2, Metadata::new()).unwrap();
        assert!(matches!(
            assign_pairs(&ds, PairingPolicy::DifferentClass, 0),
            Err(Error::InfeasiblePolicy(_))
        ));
    }

    #[test]
    fn any_policy_covers_every_target_once() {
        let ds = make_synthetic(2, 2, small_shape(), 0.1, 0).unwrap();
        let pa = assign_pairs(&ds, PairingPolicy::Any, 0).unwrap();
        assert_eq!(pa.pairs.len(), 4);
        let targets: Vec<usize> = pa.pairs.iter().map(|p| p.target).collect();
        assert_eq!(targets, vec![0, 1, 2, 3]);
        pa.validate_for(&ds).unwrap();
    }

    #[test]
    fn different_class_policy_holds_for_every_pair() {
        let ds = make_synthetic(2, 20, small_shape(), 0.1, 9).unwrap();
        let pa = assign_pairs(&ds, PairingPolicy::DifferentClass, 5).unwrap();
        // Exhaustive scan over all pairs.
        for pair in &pa.pairs {
            assert_ne!(ds.label(pair.target), ds.label(pair.selected));
        }
        pa.validate_for(&ds).unwrap();
    }

    #[test]
    fn pairing_is_deterministic_in_seed() {
        let ds = make_synthetic(3, 10, small_shape(), 0.1, 2).unwrap();
        let a = assign_pairs(&ds, PairingPolicy::DifferentClass, 42).unwrap();
        let b = assign_pairs(&ds, PairingPolicy::DifferentClass, 42).unwrap();
        let c = assign_pairs(&ds, PairingPolicy::DifferentClass, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_per_class_keeps_order_and_balance() {
        let ds = make_synthetic(2, 10, small_shape(), 0.1, 3).unwrap();
        let (train, test) = ds.split_per_class(7).unwrap();
        assert_eq!(train.len(), 14);
        assert_eq!(test.len(), 6);
        assert_eq!(train.class_counts(), vec![7, 7]);
        assert_eq!(test.class_counts(), vec![3, 3]);
        assert_eq!(train.image(0), ds.image(0));
        assert_eq!(test.image(0), ds.image(7));
    }

    #[test]
    fn image_constructor_validates_range() {
        let shape = ImageShape::new(2, 2, 1);
        assert!(Image::new(shape, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(Image::new(shape, vec![0.0, 0.5, 1.0, f32::NAN]).is_err());
        assert!(Image::new(shape, vec![0.0; 3]).is_err());
        assert!(Image::new(shape, vec![0.0; 4]).is_ok());
    }
}
