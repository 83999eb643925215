//! A small deterministic convolutional classifier family: logits, penultimate
//! features, input gradients of the feature-distance objective, and a
//! seeded SGD training loop.
//!
//! Three conv nets (differing in depth/width) plus a linear toy used by
//! oracle tests. No batch norm anywhere, so inference is a pure function of
//! (weights, image).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Image, ImageShape};
use crate::error::{Error, FormatErrorKind, Result};
use crate::forge::DistanceKind;
use crate::nn::{Conv2d, Dense, Layer, Network, Tensor};
use crate::par;
use crate::pipeline::sha256_hex;

/// Sharpness of the log-sum-exp surrogate used to differentiate the
/// infinity-norm feature distance.
const INF_SMOOTHING_BETA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    ConvSmall,
    ConvWide,
    ConvDeep,
    /// Flatten -> dense -> dense, no activations. Penultimate features are an
    /// exact affine map of the pixels; used by closed-form oracles.
    ToyLinear,
}

impl Architecture {
    /// The three conv members used for transferability experiments.
    pub fn conv_family() -> [Architecture; 3] {
        [Architecture::ConvSmall, Architecture::ConvWide, Architecture::ConvDeep]
    }

    /// Width of the activation vector feeding the final dense layer.
    pub fn penultimate_width(&self) -> usize {
        match self {
            Architecture::ConvSmall => 32,
            Architecture::ConvWide => 48,
            Architecture::ConvDeep => 24,
            Architecture::ToyLinear => 4,
        }
    }

    fn needs_pooling(&self) -> bool {
        !matches!(self, Architecture::ToyLinear)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Architecture::ConvSmall => "conv-small",
            Architecture::ConvWide => "conv-wide",
            Architecture::ConvDeep => "conv-deep",
            Architecture::ToyLinear => "toy-linear",
        };
        write!(f, "{s}")
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "conv-small" => Ok(Architecture::ConvSmall),
            "conv-wide" => Ok(Architecture::ConvWide),
            "conv-deep" => Ok(Architecture::ConvDeep),
            "toy-linear" => Ok(Architecture::ToyLinear),
            other => Err(format!(
                "unknown architecture `{other}` (expected conv-small, conv-wide, conv-deep, or toy-linear)"
            )),
        }
    }
}

/// Which activation vector acts as the feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureLayer {
    /// Input to the final dense layer.
    Penultimate,
    /// The logits themselves.
    Last,
}

impl Default for FeatureLayer {
    fn default() -> Self {
        FeatureLayer::Penultimate
    }
}

impl fmt::Display for FeatureLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureLayer::Penultimate => write!(f, "penultimate"),
            FeatureLayer::Last => write!(f, "last"),
        }
    }
}

impl FromStr for FeatureLayer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "penultimate" => Ok(FeatureLayer::Penultimate),
            "last" => Ok(FeatureLayer::Last),
            other => Err(format!("unknown feature layer `{other}` (expected penultimate or last)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Architecture,
    pub input_shape: ImageShape,
    pub num_classes: usize,
    #[serde(default)]
    pub feature_layer: FeatureLayer,
}

impl ModelConfig {
    pub fn new(arch: Architecture, input_shape: ImageShape, num_classes: usize) -> Self {
        ModelConfig { arch, input_shape, num_classes, feature_layer: FeatureLayer::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.input_shape.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "classifier needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.arch.needs_pooling() {
            let ImageShape { height, width, .. } = self.input_shape;
            if height % 4 != 0 || width % 4 != 0 || height < 4 || width < 4 {
                return Err(Error::Config(format!(
                    "{} pools twice and needs height and width divisible by 4, got {}",
                    self.arch, self.input_shape
                )));
            }
        }
        Ok(())
    }

    /// Dimension of the configured feature vector.
    pub fn feature_dim(&self) -> usize {
        match self.feature_layer {
            FeatureLayer::Penultimate => self.arch.penultimate_width(),
            FeatureLayer::Last => self.num_classes,
        }
    }
}

/// SGD-with-momentum settings; `seed` fixes init-independent stochasticity
/// (epoch shuffling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid learning rate {}",
                self.learning_rate
            )));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!("invalid momentum {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Provenance of a trained parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingFingerprint {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
}

/// Immutable weights of a configured network. Cheap to clone; inference is
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct ModelParams {
    config: ModelConfig,
    net: Network,
    fingerprint: Option<TrainingFingerprint>,
}

/// Deterministically initializes a model: Xavier-uniform weights, zero biases,
/// drawn layer by layer from a ChaCha stream seeded with `seed`.
pub fn init_model(config: ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut net = build_network(&config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat: Vec<f32> = Vec::with_capacity(net.total_params());
    for layer in net.layers() {
        if let Some(spec) = layer.param_spec() {
            let limit = (6.0 / (spec.fan_in + spec.fan_out) as f64).sqrt();
            for _ in 0..spec.weight_len {
                flat.push(rng.gen_range(-limit..limit) as f32);
            }
            flat.extend(std::iter::repeat(0.0f32).take(spec.bias_len));
        }
    }
    net.set_weights_flat(&flat)?;
    Ok(ModelParams { config, net, fingerprint: None })
}

fn build_network(config: &ModelConfig) -> Network {
    let ImageShape { height, width, channels } = config.input_shape;
    let classes = config.num_classes;
    let layers = match config.arch {
        Architecture::ConvSmall => {
            let flat = (height / 4) * (width / 4) * 16;
            vec![
                Layer::Conv(Conv2d::zeroed(channels, 8)),
                Layer::Tanh,
                Layer::AvgPool2,
                Layer::Conv(Conv2d::zeroed(8, 16)),
                Layer::Tanh,
                Layer::AvgPool2,
                Layer::Flatten,
                Layer::Dense(Dense::zeroed(flat, 32)),
                Layer::Tanh,
                Layer::Dense(Dense::zeroed(32, classes)),
            ]
        }
        Architecture::ConvWide => {
            let flat = (height / 4) * (width / 4) * 24;
            vec![
                Layer::Conv(Conv2d::zeroed(channels, 12)),
                Layer::Tanh,
                Layer::AvgPool2,
                Layer::Conv(Conv2d::zeroed(12, 24)),
                Layer::Tanh,
                Layer::AvgPool2,
                Layer::Flatten,
                Layer::Dense(Dense::zeroed(flat, 48)),
                Layer::Tanh,
                Layer::Dense(Dense::zeroed(48, classes)),
            ]
        }
        Architecture::ConvDeep => {
            let flat = (height / 4) * (width / 4) * 16;
            vec![
                Layer::Conv(Conv2d::zeroed(channels, 8)),
                Layer::Tanh,
                Layer::AvgPool2,
                Layer::Conv(Conv2d::zeroed(8, 12)),
                Layer::Tanh,
                Layer::Conv(Conv2d::zeroed(12, 16)),
                Layer::Tanh,
                Layer::AvgPool2,
                Layer::Flatten,
                Layer::Dense(Dense::zeroed(flat, 24)),
                Layer::Tanh,
                Layer::Dense(Dense::zeroed(24, classes)),
            ]
        }
        Architecture::ToyLinear => {
            let flat = config.input_shape.pixel_count();
            vec![
                Layer::Flatten,
                Layer::Dense(Dense::zeroed(flat, 4)),
                Layer::Dense(Dense::zeroed(4, classes)),
            ]
        }
    };
    Network::new(layers)
}

impl ModelParams {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> Option<&TrainingFingerprint> {
        self.fingerprint.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    pub fn param_count(&self) -> usize {
        self.net.total_params()
    }

    /// All trainable parameters in declared layer order (weights then bias
    /// per layer). This is the checkpoint blob layout.
    pub fn weights_flat(&self) -> Vec<f32> {
        self.net.weights_flat()
    }

    /// Replaces all parameters; used by checkpoint loading and by tests that
    /// install hand-built weights.
    pub fn set_weights_flat(&mut self, flat: &[f32]) -> Result<()> {
        self.net.set_weights_flat(flat)
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        if image.shape() != self.config.input_shape {
            return Err(Error::InvalidArgument(format!(
                "image shape {} does not match model input {}",
                image.shape(),
                self.config.input_shape
            )));
        }
        Ok(())
    }

    fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        if dataset.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        if dataset.shape() != self.config.input_shape {
            return Err(Error::InvalidArgument(format!(
                "dataset shape {} does not match model input {}",
                dataset.shape(),
                self.config.input_shape
            )));
        }
        if dataset.num_classes() != self.config.num_classes {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} classes, model expects {}",
                dataset.num_classes(),
                self.config.num_classes
            )));
        }
        Ok(())
    }

    fn feature_boundary(&self) -> usize {
        match self.config.feature_layer {
            FeatureLayer::Penultimate => self.net.penultimate_index(),
            FeatureLayer::Last => self.net.layer_count(),
        }
    }

    /// Class scores (length `num_classes`).
    pub fn logits(&self, image: &Image) -> Result<Vec<f64>> {
        self.check_image(image)?;
        let acts = self.net.forward_all(Tensor::from_image(image));
        let out = &acts.last().expect("forward returns input at least").data;
        for v in out {
            if !v.is_finite() {
                return Err(Error::Numeric {
                    layer: self.net.layer_name(self.net.layer_count() - 1),
                    detail: format!("logit is {v}"),
                });
            }
        }
        Ok(out.clone())
    }

    /// Activation vector of the configured feature layer; a pure function of
    /// (params, image).
    pub fn forward_features(&self, image: &Image) -> Result<Vec<f64>> {
        self.check_image(image)?;
        let boundary = self.feature_boundary();
        let acts = self.net.forward_prefix(Tensor::from_image(image), boundary);
        Ok(acts.last().expect("non-empty").data.clone())
    }

    /// Gradient of `||f(image) - target_features||_p` with respect to the
    /// image, flattened in the image's row-major (h, w, c) layout. The
    /// infinity norm is differentiated through a log-sum-exp surrogate.
    pub fn input_gradient(
        &self,
        image: &Image,
        target_features: &[f64],
        distance: DistanceKind,
    ) -> Result<Vec<f64>> {
        self.check_image(image)?;
        if target_features.len() != self.feature_dim() {
            return Err(Error::InvalidArgument(format!(
                "target feature vector has {} entries, model produces {}",
                target_features.len(),
                self.feature_dim()
            )));
        }
        let boundary = self.feature_boundary();
        let acts = self.net.forward_prefix(Tensor::from_image(image), boundary);
        let features = &acts.last().expect("non-empty").data;
        let residual: Vec<f64> =
            features.iter().zip(target_features).map(|(&f, &t)| f - t).collect();

        let seed = match distance {
            DistanceKind::L2 => {
                let norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    // Subgradient 0 at the objective's minimum.
                    vec![0.0; residual.len()]
                } else {
                    residual.iter().map(|v| v / norm).collect()
                }
            }
            DistanceKind::LInf => smoothed_linf_gradient(&residual),
        };

        let grad =
            self.net.backward_from(&acts, Tensor::flat(seed), boundary, None)?;
        Ok(grad.data)
    }

    /// Argmax class (first index on ties).
    pub fn predict(&self, image: &Image) -> Result<usize> {
        let logits = self.logits(image)?;
        Ok(argmax(&logits))
    }

    /// Fraction of argmax-correct predictions.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        self.check_dataset(dataset)?;
        evaluate_net(&self.net, dataset)
    }

    /// Minibatch SGD with momentum over softmax cross-entropy. Deterministic
    /// given `tc.seed`; per-example gradients within a batch may be computed
    /// in parallel but are reduced in index order.
    pub fn train(self, dataset: &Dataset, tc: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
        self.check_dataset(dataset)?;
        tc.validate()?;
        if tc.epochs == 0 {
            return Ok((self, TrainHistory::default()));
        }

        let mut net = self.net;
        let total = net.total_params();
        let mut velocity = vec![0.0f64; total];
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut history = TrainHistory::default();

        for epoch in 1..=tc.epochs {
            shuffle(&mut order, &mut rng);
            for batch in order.chunks(tc.batch_size) {
                let per_example = par::map_indexed(batch.len(), |j| {
                    let li = &dataset.images()[batch[j]];
                    example_gradient(&net, &li.image, li.label as usize)
                });

                let mut grad_sum = vec![0.0f64; total];
                let mut loss_sum = 0.0f64;
                for result in per_example {
                    let (loss, grads) = result?;
                    loss_sum += loss;
                    for (acc, g) in grad_sum.iter_mut().zip(&grads) {
                        *acc += g;
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                let batch_loss = loss_sum * scale;
                if !batch_loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        detail: format!("batch loss is {batch_loss}"),
                    });
                }

                let mut flat = net.weights_flat();
                for i in 0..total {
                    velocity[i] = tc.momentum * velocity[i] + grad_sum[i] * scale;
                    flat[i] = (f64::from(flat[i]) - tc.learning_rate * velocity[i]) as f32;
                }
                net.set_weights_flat(&flat)?;
            }

            let loss = mean_loss(&net, dataset)?;
            let accuracy = evaluate_net(&net, dataset)?;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, detail: format!("epoch loss is {loss}") });
            }
            history.epochs.push(EpochStats { epoch, loss, accuracy });
        }

        let fingerprint = TrainingFingerprint {
            seed: tc.seed,
            epochs: tc.epochs,
            final_loss: history.final_loss().unwrap_or(f64::NAN),
        };
        Ok((ModelParams { config: self.config, net, fingerprint: Some(fingerprint) }, history))
    }

    /// Serializes as a length-prefixed JSON header followed by the raw
    /// little-endian f32 weight blob in declared layer order.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let flat = self.weights_flat();
        let header = CheckpointHeader {
            config: self.config,
            fingerprint: self.fingerprint,
            weight_count: flat.len(),
        };
        let header_json = serde_json::to_string(&header)?;
        let header_bytes = header_json.as_bytes();
        let mut out = Vec::with_capacity(4 + header_bytes.len() + flat.len() * 4);
        out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(header_bytes);
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], source_name: &str) -> Result<Self> {
        let fmt_err = |offset: u64, kind: FormatErrorKind| Error::Format {
            path: source_name.to_string(),
            offset,
            kind,
        };
        if bytes.len() < 4 {
            return Err(fmt_err(
                0,
                FormatErrorKind::Truncated { expected_bytes: 4, actual_bytes: bytes.len() as u64 },
            ));
        }
        let header_len = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        let header_end = 4 + header_len;
        if bytes.len() < header_end {
            return Err(fmt_err(
                4,
                FormatErrorKind::Truncated {
                    expected_bytes: header_end as u64,
                    actual_bytes: bytes.len() as u64,
                },
            ));
        }
        let header: CheckpointHeader = serde_json::from_slice(&bytes[4..header_end])
            .map_err(|e| fmt_err(4, FormatErrorKind::CorruptMetadata { detail: e.to_string() }))?;
        header.config.validate()?;

        let mut net = build_network(&header.config);
        if net.total_params() != header.weight_count {
            return Err(fmt_err(
                4,
                FormatErrorKind::InvalidField {
                    detail: format!(
                        "header declares {} weights, architecture needs {}",
                        header.weight_count,
                        net.total_params()
                    ),
                },
            ));
        }
        let blob = &bytes[header_end..];
        let expected = header.weight_count * 4;
        if blob.len() < expected {
            return Err(fmt_err(
                header_end as u64,
                FormatErrorKind::Truncated {
                    expected_bytes: (header_end + expected) as u64,
                    actual_bytes: bytes.len() as u64,
                },
            ));
        }
        if blob.len() > expected {
            return Err(fmt_err(
                (header_end + expected) as u64,
                FormatErrorKind::TrailingBytes { count: (blob.len() - expected) as u64 },
            ));
        }
        let mut flat = Vec::with_capacity(header.weight_count);
        for (i, chunk) in blob.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(fmt_err(
                    (header_end + i * 4) as u64,
                    FormatErrorKind::InvalidField { detail: format!("weight {i} is {v}") },
                ));
            }
            flat.push(v);
        }
        net.set_weights_flat(&flat)?;
        Ok(ModelParams { config: header.config, net, fingerprint: header.fingerprint })
    }

    /// Writes the checkpoint; returns the SHA-256 hex digest of the bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let bytes = self.to_bytes()?;
        let digest = sha256_hex(&bytes);
        std::fs::write(path, &bytes)?;
        Ok(digest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        ModelParams::from_bytes(&bytes, &path.as_ref().display().to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    fingerprint: Option<TrainingFingerprint>,
    weight_count: usize,
}

/// Gradient of the log-sum-exp surrogate of `max_i |v_i|`:
/// softmax(beta * |v|) element-wise times sign(v).
fn smoothed_linf_gradient(residual: &[f64]) -> Vec<f64> {
    let max_abs = residual.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if max_abs == 0.0 {
        return vec![0.0; residual.len()];
    }
    let weights: Vec<f64> = residual
        .iter()
        .map(|v| (INF_SMOOTHING_BETA * (v.abs() - max_abs)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    residual
        .iter()
        .zip(&weights)
        .map(|(&v, &w)| w / z * v.signum())
        .collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Stable cross-entropy with gradient: returns (loss, d loss / d logits).
fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|&e| e / z).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

fn example_gradient(net: &Network, image: &Image, label: usize) -> Result<(f64, Vec<f64>)> {
    let acts = net.forward_all(Tensor::from_image(image));
    let logits = &acts.last().expect("non-empty").data;
    let (loss, dlogits) = softmax_cross_entropy(logits, label);
    let mut grads = vec![0.0f64; net.total_params()];
    net.backward_from(&acts, Tensor::flat(dlogits), net.layer_count(), Some(&mut grads))?;
    Ok((loss, grads))
}

fn evaluate_net(net: &Network, dataset: &Dataset) -> Result<f64> {
    let hits = par::map_indexed(dataset.len(), |i| {
        let li = &dataset.images()[i];
        let acts = net.forward_all(Tensor::from_image(&li.image));
        argmax(&acts.last().expect("non-empty").data) == li.label as usize
    });
    let correct = hits.iter().filter(|&&h| h).count();
    Ok(correct as f64 / dataset.len() as f64)
}

fn mean_loss(net: &Network, dataset: &Dataset) -> Result<f64> {
    let losses = par::map_indexed(dataset.len(), |i| {
        let li = &dataset.images()[i];
        let acts = net.forward_all(Tensor::from_image(&li.image));
        softmax_cross_entropy(&acts.last().expect("non-empty").data, li.label as usize).0
    });
    Ok(losses.iter().sum::<f64>() / dataset.len() as f64)
}

/// Fisher-Yates driven by the caller's rng; avoids depending on shuffle
/// implementation details of the rand crate.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}
