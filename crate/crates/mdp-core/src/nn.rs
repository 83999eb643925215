//! Internal layer machinery: activation tensors, forward/backward passes, and
//! flat parameter views.
//!
//! Parameters are stored as `f32` (the checkpoint format is a raw f32 blob);
//! all arithmetic widens to `f64` so gradients survive central-difference
//! scrutiny at step 1e-3.

use crate::dataset::Image;
use crate::error::{Error, Result};

/// Dense activation buffer. Flat vectors use `h = w = 1`.
#[derive(Debug, Clone)]
pub(crate) struct Tensor {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor { h, w, c, data: vec![0.0; h * w * c] }
    }

    pub fn flat(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor { h: 1, w: 1, c: n, data }
    }

    pub fn from_image(image: &Image) -> Self {
        let s = image.shape();
        Tensor {
            h: s.height,
            w: s.width,
            c: s.channels,
            data: image.pixels().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    fn check_finite(&self, layer: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric {
                    layer: layer.to_string(),
                    detail: format!("entry {i} is {v}"),
                });
            }
        }
        Ok(())
    }
}

/// 3x3 convolution, stride 1, zero padding 1. Weight layout
/// `[out_ch][in_ch][ky][kx]`, bias `[out_ch]`.
#[derive(Debug, Clone)]
pub(crate) struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn zeroed(in_ch: usize, out_ch: usize) -> Self {
        Conv2d { in_ch, out_ch, weights: vec![0.0; out_ch * in_ch * 9], bias: vec![0.0; out_ch] }
    }
}

/// Fully connected layer. Weight layout `[out][in]`, bias `[out]`.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Dense {
    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Dense { in_dim, out_dim, weights: vec![0.0; out_dim * in_dim], bias: vec![0.0; out_dim] }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Layer {
    Conv(Conv2d),
    Tanh,
    AvgPool2,
    Flatten,
    Dense(Dense),
}

/// Parameter counts and fan sizes for initialization.
pub(crate) struct ParamSpec {
    pub weight_len: usize,
    pub bias_len: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Tanh => "tanh",
            Layer::AvgPool2 => "avgpool",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn param_spec(&self) -> Option<ParamSpec> {
        match self {
            Layer::Conv(c) => Some(ParamSpec {
                weight_len: c.weights.len(),
                bias_len: c.bias.len(),
                fan_in: c.in_ch * 9,
                fan_out: c.out_ch * 9,
            }),
            Layer::Dense(d) => Some(ParamSpec {
                weight_len: d.weights.len(),
                bias_len: d.bias.len(),
                fan_in: d.in_dim,
                fan_out: d.out_dim,
            }),
            _ => None,
        }
    }

    pub fn param_len(&self) -> usize {
        self.param_spec().map_or(0, |s| s.weight_len + s.bias_len)
    }

    fn forward(&self, input: &Tensor) -> Tensor {
        match self {
            Layer::Conv(conv) => {
                let (h, w) = (input.h, input.w);
                debug_assert_eq!(input.c, conv.in_ch);
                let mut out = Tensor::zeros(h, w, conv.out_ch);
                for y in 0..h {
                    for x in 0..w {
                        for oc in 0..conv.out_ch {
                            let mut acc = f64::from(conv.bias[oc]);
                            for ky in 0..3 {
                                let ys = y + ky;
                                if ys < 1 || ys > h {
                                    continue;
                                }
                                let iy = ys - 1;
                                for kx in 0..3 {
                                    let xs = x + kx;
                                    if xs < 1 || xs > w {
                                        continue;
                                    }
                                    let ix = xs - 1;
                                    let in_base = (iy * w + ix) * conv.in_ch;
                                    let w_base = ((oc * conv.in_ch) * 3 + ky) * 3 + kx;
                                    for ic in 0..conv.in_ch {
                                        let widx = w_base + ic * 9;
                                        acc += input.data[in_base + ic]
                                            * f64::from(conv.weights[widx]);
                                    }
                                }
                            }
                            out.data[(y * w + x) * conv.out_ch + oc] = acc;
                        }
                    }
                }
                out
            }
            Layer::Tanh => {
                let mut out = input.clone();
                for v in &mut out.data {
                    *v = v.tanh();
                }
                out
            }
            Layer::AvgPool2 => {
                debug_assert!(input.h % 2 == 0 && input.w % 2 == 0);
                let (oh, ow, c) = (input.h / 2, input.w / 2, input.c);
                let mut out = Tensor::zeros(oh, ow, c);
                for y in 0..oh {
                    for x in 0..ow {
                        for ch in 0..c {
                            let mut acc = 0.0;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    acc += input.data
                                        [((2 * y + dy) * input.w + (2 * x + dx)) * c + ch];
                                }
                            }
                            out.data[(y * ow + x) * c + ch] = 0.25 * acc;
                        }
                    }
                }
                out
            }
            Layer::Flatten => Tensor::flat(input.data.clone()),
            Layer::Dense(dense) => {
                debug_assert_eq!(input.len(), dense.in_dim);
                let mut out = Tensor::flat(vec![0.0; dense.out_dim]);
                for o in 0..dense.out_dim {
                    let mut acc = f64::from(dense.bias[o]);
                    let row = o * dense.in_dim;
                    for i in 0..dense.in_dim {
                        acc += f64::from(dense.weights[row + i]) * input.data[i];
                    }
                    out.data[o] = acc;
                }
                out
            }
        }
    }

    /// Propagates `grad_out` (w.r.t. this layer's output) back to the input,
    /// optionally accumulating parameter gradients into `param_grads`
    /// (layout: weights then bias).
    fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_out: &Tensor,
        param_grads: Option<&mut [f64]>,
    ) -> Tensor {
        match self {
            Layer::Conv(conv) => {
                let (h, w) = (input.h, input.w);
                let mut grad_in = Tensor::zeros(h, w, conv.in_ch);
                let wlen = conv.weights.len();
                let mut pg = param_grads;
                for y in 0..h {
                    for x in 0..w {
                        for oc in 0..conv.out_ch {
                            let g = grad_out.data[(y * w + x) * conv.out_ch + oc];
                            if let Some(pg) = pg.as_deref_mut() {
                                pg[wlen + oc] += g;
                            }
                            for ky in 0..3 {
                                let ys = y + ky;
                                if ys < 1 || ys > h {
                                    continue;
                                }
                                let iy = ys - 1;
                                for kx in 0..3 {
                                    let xs = x + kx;
                                    if xs < 1 || xs > w {
                                        continue;
                                    }
                                    let ix = xs - 1;
                                    let in_base = (iy * w + ix) * conv.in_ch;
                                    let w_base = ((oc * conv.in_ch) * 3 + ky) * 3 + kx;
                                    for ic in 0..conv.in_ch {
                                        let widx = w_base + ic * 9;
                                        grad_in.data[in_base + ic] +=
                                            f64::from(conv.weights[widx]) * g;
                                        if let Some(pg) = pg.as_deref_mut() {
                                            pg[widx] += input.data[in_base + ic] * g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                grad_in
            }
            Layer::Tanh => {
                let mut grad_in = grad_out.clone();
                grad_in.h = input.h;
                grad_in.w = input.w;
                grad_in.c = input.c;
                for (g, &o) in grad_in.data.iter_mut().zip(output.data.iter()) {
                    *g *= 1.0 - o * o;
                }
                grad_in
            }
            Layer::AvgPool2 => {
                let (oh, ow, c) = (output.h, output.w, output.c);
                let mut grad_in = Tensor::zeros(input.h, input.w, input.c);
                for y in 0..oh {
                    for x in 0..ow {
                        for ch in 0..c {
                            let g = 0.25 * grad_out.data[(y * ow + x) * c + ch];
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    grad_in.data
                                        [((2 * y + dy) * input.w + (2 * x + dx)) * c + ch] += g;
                                }
                            }
                        }
                    }
                }
                grad_in
            }
            Layer::Flatten => {
                let mut grad_in = grad_out.clone();
                grad_in.h = input.h;
                grad_in.w = input.w;
                grad_in.c = input.c;
                grad_in
            }
            Layer::Dense(dense) => {
                let mut grad_in = Tensor { h: input.h, w: input.w, c: input.c, data: vec![0.0; dense.in_dim] };
                let wlen = dense.weights.len();
                let mut pg = param_grads;
                for o in 0..dense.out_dim {
                    let g = grad_out.data[o];
                    let row = o * dense.in_dim;
                    if let Some(pg) = pg.as_deref_mut() {
                        pg[wlen + o] += g;
                        for i in 0..dense.in_dim {
                            pg[row + i] += input.data[i] * g;
                        }
                    }
                    for i in 0..dense.in_dim {
                        grad_in.data[i] += f64::from(dense.weights[row + i]) * g;
                    }
                }
                grad_in
            }
        }
    }
}

/// A layer stack with flat parameter addressing.
#[derive(Debug, Clone)]
pub(crate) struct Network {
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    total_params: usize,
    last_dense: usize,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0usize;
        for layer in &layers {
            offsets.push(total);
            total += layer.param_len();
        }
        let last_dense = layers
            .iter()
            .rposition(|l| matches!(l, Layer::Dense(_)))
            .expect("every architecture ends in a dense layer");
        Network { layers, offsets, total_params: total, last_dense }
    }

    pub fn total_params(&self) -> usize {
        self.total_params
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Activation index holding the penultimate features (the input to the
    /// final dense layer).
    pub fn penultimate_index(&self) -> usize {
        self.last_dense
    }

    pub fn layer_name(&self, index: usize) -> String {
        format!("{}#{index}", self.layers[index].kind_name())
    }

    /// Runs layers `0..upto`, returning `upto + 1` activations with the input
    /// at position 0.
    pub fn forward_prefix(&self, input: Tensor, upto: usize) -> Vec<Tensor> {
        let mut acts = Vec::with_capacity(upto + 1);
        acts.push(input);
        for layer in &self.layers[..upto] {
            let next = layer.forward(acts.last().expect("non-empty"));
            acts.push(next);
        }
        acts
    }

    pub fn forward_all(&self, input: Tensor) -> Vec<Tensor> {
        self.forward_prefix(input, self.layers.len())
    }

    /// Backpropagates `grad` (w.r.t. `acts[from]`) down to the input,
    /// optionally accumulating parameter gradients. Fails with the layer name
    /// on the first non-finite intermediate.
    pub fn backward_from(
        &self,
        acts: &[Tensor],
        mut grad: Tensor,
        from: usize,
        mut param_grads: Option<&mut [f64]>,
    ) -> Result<Tensor> {
        for i in (0..from).rev() {
            let slice = param_grads.as_deref_mut().map(|pg| {
                let start = self.offsets[i];
                let len = self.layers[i].param_len();
                &mut pg[start..start + len]
            });
            grad = self.layers[i].backward(&acts[i], &acts[i + 1], &grad, slice);
            grad.check_finite(&self.layer_name(i))?;
        }
        Ok(grad)
    }

    pub fn weights_flat(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.total_params);
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.extend_from_slice(&c.weights);
                    out.extend_from_slice(&c.bias);
                }
                Layer::Dense(d) => {
                    out.extend_from_slice(&d.weights);
                    out.extend_from_slice(&d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn set_weights_flat(&mut self, flat: &[f32]) -> Result<()> {
        if flat.len() != self.total_params {
            return Err(Error::InvalidArgument(format!(
                "weight vector has {} entries, network declares {}",
                flat.len(),
                self.total_params
            )));
        }
        let mut pos = 0usize;
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    let (wl, bl) = (c.weights.len(), c.bias.len());
                    c.weights.copy_from_slice(&flat[pos..pos + wl]);
                    pos += wl;
                    c.bias.copy_from_slice(&flat[pos..pos + bl]);
                    pos += bl;
                }
                Layer::Dense(d) => {
                    let (wl, bl) = (d.weights.len(), d.bias.len());
                    d.weights.copy_from_slice(&flat[pos..pos + wl]);
                    pos += wl;
                    d.bias.copy_from_slice(&flat[pos..pos + bl]);
                    pos += bl;
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }
}
