//! Layer descriptions, parameterised layers and sequential chains.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_shape, Result};
use crate::nn::activation::{relu_backward, relu_forward};
use crate::nn::conv::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
    conv_transpose_output, Geometry,
};
use crate::nn::dense::{dense_backward, dense_forward};
use crate::nn::pool::{
    maxpool2d_backward, maxpool2d_forward, upsample_nearest_backward, upsample_nearest_forward,
};
use crate::nn::Tensor;
use crate::Scalar;

/// Static description of one layer. Shapes below are per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
    },
    Deconv {
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    Upsample {
        factor: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Flatten,
    Reshape {
        channels: usize,
        height: usize,
        width: usize,
    },
    /// Center-crop or edge-pad each spatial dimension to a fixed size.
    Fit {
        height: usize,
        width: usize,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Deconv { .. } => "deconv",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Upsample { .. } => "upsample",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::Fit { .. } => "fit",
        }
    }

    /// Weight tensor shape, if the layer has weights.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel: (kh, kw),
                ..
            } => Some(vec![out_channels, in_channels, kh, kw]),
            LayerSpec::Deconv {
                in_channels,
                out_channels,
                kernel: (kh, kw),
                ..
            } => Some(vec![in_channels, out_channels, kh, kw]),
            LayerSpec::Dense { inputs, outputs } => Some(vec![outputs, inputs]),
            _ => None,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerSpec::Conv { out_channels, .. } | LayerSpec::Deconv { out_channels, .. } => {
                out_channels
            }
            LayerSpec::Dense { outputs, .. } => outputs,
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape()
            .map(|s| s.iter().product::<usize>())
            .unwrap_or(0)
            + self.bias_len()
    }

    /// Glorot fan-in/fan-out of the weight tensor.
    fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel: (kh, kw),
                ..
            }
            | LayerSpec::Deconv {
                in_channels,
                out_channels,
                kernel: (kh, kw),
                ..
            } => (in_channels * kh * kw, out_channels * kh * kw),
            LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
            _ => (0, 0),
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let spatial = |what: &str| match input {
            &[c, h, w] => Ok((c, h, w)),
            s => Err(invalid_shape(format!("{what} expects c×h×w input, got {s:?}"))),
        };
        let flat: usize = input.iter().product();
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let (c, h, w) = spatial("conv")?;
                if c != in_channels {
                    return Err(invalid_shape(format!(
                        "conv expects {in_channels} channels, got {c}"
                    )));
                }
                let g = Geometry::new(c, (h, w), kernel, stride, padding)?;
                Ok(vec![out_channels, g.oh, g.ow])
            }
            LayerSpec::Deconv {
                in_channels,
                out_channels,
                kernel: (kh, kw),
                stride,
                padding: (ph, pw),
            } => {
                let (c, h, w) = spatial("deconv")?;
                if c != in_channels {
                    return Err(invalid_shape(format!(
                        "deconv expects {in_channels} channels, got {c}"
                    )));
                }
                Ok(vec![
                    out_channels,
                    conv_transpose_output(h, kh, stride, ph)?,
                    conv_transpose_output(w, kw, stride, pw)?,
                ])
            }
            LayerSpec::MaxPool { window, stride } => {
                let (c, h, w) = spatial("maxpool")?;
                if h < window || w < window || stride == 0 {
                    return Err(invalid_shape(format!(
                        "maxpool window {window} exceeds {h}×{w} input"
                    )));
                }
                Ok(vec![c, (h - window) / stride + 1, (w - window) / stride + 1])
            }
            LayerSpec::Upsample { factor } => {
                let (c, h, w) = spatial("upsample")?;
                Ok(vec![c, h * factor, w * factor])
            }
            LayerSpec::Dense { inputs, outputs } => {
                if flat != inputs {
                    return Err(invalid_shape(format!(
                        "dense expects {inputs} inputs, got {flat}"
                    )));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![flat]),
            LayerSpec::Reshape {
                channels,
                height,
                width,
            } => {
                if flat != channels * height * width {
                    return Err(invalid_shape(format!(
                        "cannot reshape {flat} values into {channels}×{height}×{width}"
                    )));
                }
                Ok(vec![channels, height, width])
            }
            LayerSpec::Fit { height, width } => {
                let (c, _, _) = spatial("fit")?;
                if height == 0 || width == 0 {
                    return Err(invalid_shape("fit target must be non-empty"));
                }
                Ok(vec![c, height, width])
            }
        }
    }
}

/// Source index along one axis of a center-crop / edge-pad.
fn fit_source(y: usize, cur: usize, target: usize) -> usize {
    if cur >= target {
        y + (cur - target) / 2
    } else {
        let before = (target - cur) / 2;
        y.saturating_sub(before).min(cur - 1)
    }
}

fn fit_forward<T: Scalar>(x: &Tensor<T>, th: usize, tw: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4("fit input")?;
    let mut out = Tensor::zeros(vec![n, c, th, tw]);
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        for y in 0..th {
            let sy = fit_source(y, h, th);
            for xo in 0..tw {
                dst[(plane * th + y) * tw + xo] = src[(plane * h + sy) * w + fit_source(xo, w, tw)];
            }
        }
    }
    Ok(out)
}

fn fit_backward<T: Scalar>(input_shape: &[usize], upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, th, tw) = upstream.dims4("fit upstream")?;
    let (h, w) = (input_shape[2], input_shape[3]);
    let mut grad = Tensor::zeros(input_shape.to_vec());
    let g = grad.data_mut();
    let dy = upstream.data();
    for plane in 0..n * c {
        for y in 0..th {
            let sy = fit_source(y, h, th);
            for xo in 0..tw {
                g[(plane * h + sy) * w + fit_source(xo, w, tw)] += dy[(plane * th + y) * tw + xo];
            }
        }
    }
    Ok(grad)
}

/// A layer instance: spec, parameters, accumulated gradients and the forward
/// cache needed by `backward`.
#[derive(Debug, Clone)]
pub struct Layer<T> {
    pub name: String,
    pub spec: LayerSpec,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
    grad_weight: Tensor<T>,
    grad_bias: Vec<T>,
    input: Option<Tensor<T>>,
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl<T: Scalar> Layer<T> {
    /// Zero-initialised layer.
    pub fn zeroed(name: impl Into<String>, spec: LayerSpec) -> Self {
        let wshape = spec.weight_shape().unwrap_or_else(|| vec![0]);
        Self {
            name: name.into(),
            spec,
            weight: Tensor::zeros(wshape.clone()),
            bias: vec![T::zero(); spec.bias_len()],
            grad_weight: Tensor::zeros(wshape),
            grad_bias: vec![T::zero(); spec.bias_len()],
            input: None,
            input_shape: Vec::new(),
            argmax: Vec::new(),
        }
    }

    /// Weights uniform in `±sqrt(6/(fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(name: impl Into<String>, spec: LayerSpec, rng: &mut R) -> Self {
        let mut layer = Self::zeroed(name, spec);
        let (fan_in, fan_out) = spec.fans();
        if fan_in + fan_out > 0 {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in layer.weight.data_mut() {
                *w = T::lit(rng.random_range(-limit..limit));
            }
        }
        layer
    }

    pub fn has_params(&self) -> bool {
        self.spec.param_count() > 0
    }

    pub fn grad_weight(&self) -> &Tensor<T> {
        &self.grad_weight
    }

    pub fn grad_bias(&self) -> &[T] {
        &self.grad_bias
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.data_mut().fill(T::zero());
        self.grad_bias.fill(T::zero());
    }

    /// Drops cached activations.
    pub fn clear_cache(&mut self) {
        self.input = None;
        self.input_shape.clear();
        self.argmax.clear();
    }

    /// Forward pass without caching. Also returns the pooling routes (empty for
    /// other kinds).
    pub fn infer(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let n = x.rows();
        let y = match self.spec {
            LayerSpec::Conv {
                stride, padding, ..
            } => conv2d_forward(x, &self.weight, &self.bias, stride, padding)?,
            LayerSpec::Deconv {
                stride, padding, ..
            } => conv_transpose2d_forward(x, &self.weight, &self.bias, stride, padding)?,
            LayerSpec::MaxPool { window, stride } => return maxpool2d_forward(x, window, stride),
            LayerSpec::Upsample { factor } => upsample_nearest_forward(x, factor)?,
            LayerSpec::Dense { .. } => dense_forward(x, &self.weight, &self.bias)?,
            LayerSpec::Relu => relu_forward(x),
            LayerSpec::Flatten => {
                let flat = x.row_len();
                x.clone().reshape(vec![n, flat])?
            }
            LayerSpec::Reshape {
                channels,
                height,
                width,
            } => x.clone().reshape(vec![n, channels, height, width])?,
            LayerSpec::Fit { height, width } => fit_forward(x, height, width)?,
        };
        Ok((y, Vec::new()))
    }

    /// Forward pass over a batch. With `keep` set, whatever
    /// [`Layer::backward`] needs is cached.
    pub fn forward(&mut self, x: Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        let (y, argmax) = self.infer(&x)?;
        if keep {
            self.input_shape = x.shape().to_vec();
            self.argmax = argmax;
            self.input = match self.spec {
                LayerSpec::Conv { .. }
                | LayerSpec::Deconv { .. }
                | LayerSpec::Dense { .. }
                | LayerSpec::Relu => Some(x),
                _ => None,
            };
        }
        Ok(y)
    }

    /// Backward pass: accumulates parameter gradients and returns the gradient
    /// with respect to the layer input.
    pub fn backward(&mut self, upstream: Tensor<T>) -> Result<Tensor<T>> {
        if self.input_shape.is_empty() {
            return Err(invalid_shape(format!(
                "layer {}: backward called without a cached forward pass",
                self.name
            )));
        }
        let shape = self.input_shape.clone();
        let cached = || {
            self.input
                .as_ref()
                .ok_or_else(|| invalid_shape("missing cached input"))
        };
        match self.spec {
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => upstream.reshape(shape),
            LayerSpec::MaxPool { .. } => maxpool2d_backward(&shape, &self.argmax, &upstream),
            LayerSpec::Upsample { factor } => upsample_nearest_backward(&upstream, factor),
            LayerSpec::Fit { .. } => fit_backward(&shape, &upstream),
            LayerSpec::Relu => relu_backward(cached()?, &upstream),
            LayerSpec::Conv {
                stride, padding, ..
            } => {
                let g = conv2d_backward(cached()?, &self.weight, &upstream, stride, padding)?;
                self.accumulate(&g.weight, &g.bias);
                Ok(g.input)
            }
            LayerSpec::Deconv {
                stride, padding, ..
            } => {
                let g = conv_transpose2d_backward(cached()?, &self.weight, &upstream, stride, padding)?;
                self.accumulate(&g.weight, &g.bias);
                Ok(g.input)
            }
            LayerSpec::Dense { .. } => {
                let g = dense_backward(cached()?, &self.weight, &upstream)?;
                self.accumulate(&g.weight, &g.bias);
                Ok(g.input)
            }
        }
    }

    fn accumulate(&mut self, gw: &Tensor<T>, gb: &[T]) {
        for (a, &b) in self.grad_weight.data_mut().iter_mut().zip(gw.data()) {
            *a += b;
        }
        for (a, &b) in self.grad_bias.iter_mut().zip(gb) {
            *a += b;
        }
    }

    /// `(parameters, gradients)` blocks: weight then bias.
    pub fn param_pairs(&mut self) -> Vec<(&mut [T], &[T])> {
        if !self.has_params() {
            return Vec::new();
        }
        vec![
            (self.weight.data_mut(), self.grad_weight.data()),
            (&mut self.bias[..], &self.grad_bias[..]),
        ]
    }

    fn hash_pattern<H: Hasher>(&self, state: &mut H) {
        match self.spec {
            LayerSpec::Relu => {
                if let Some(x) = &self.input {
                    for v in x.data() {
                        (*v > T::zero()).hash(state);
                    }
                }
            }
            LayerSpec::MaxPool { .. } => self.argmax.hash(state),
            _ => {}
        }
    }
}

/// An ordered chain of layers.
#[derive(Debug, Clone)]
pub struct Sequential<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for l in &self.layers {
            shape = l.spec.output_shape(&shape).map_err(|e| {
                invalid_shape(format!("layer {} ({}): {e}", l.name, l.spec.kind()))
            })?;
        }
        Ok(shape)
    }

    /// Forward pass without touching any cache.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut iter = self.layers.iter();
        let Some(first) = iter.next() else {
            return Ok(x.clone());
        };
        let mut y = first
            .infer(x)
            .map_err(|e| invalid_shape(format!("layer {}: {e}", first.name)))?
            .0;
        for l in iter {
            y = l
                .infer(&y)
                .map_err(|e| invalid_shape(format!("layer {}: {e}", l.name)))?
                .0;
        }
        Ok(y)
    }

    pub fn forward(&mut self, mut x: Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        for l in &mut self.layers {
            let name = l.name.clone();
            x = l
                .forward(x, keep)
                .map_err(|e| invalid_shape(format!("layer {name}: {e}")))?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, mut grad: Tensor<T>) -> Result<Tensor<T>> {
        for l in self.layers.iter_mut().rev() {
            grad = l.backward(grad)?;
        }
        Ok(grad)
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(Layer::zero_grad);
    }

    pub fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    pub fn param_pairs(&mut self) -> Vec<(&mut [T], &[T])> {
        self.layers.iter_mut().flat_map(Layer::param_pairs).collect()
    }

    /// Names of parameter blocks in [`Sequential::param_pairs`] order.
    pub fn block_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .filter(|l| l.has_params())
            .flat_map(|l| [format!("{}.weight", l.name), format!("{}.bias", l.name)])
            .collect()
    }

    /// Parameters in declaration order (weight then bias per layer).
    pub fn flat_params(&self) -> Vec<T> {
        self.layers
            .iter()
            .filter(|l| l.has_params())
            .flat_map(|l| l.weight.data().iter().chain(&l.bias).copied())
            .collect()
    }

    /// Overwrites all parameters from a flat slice in declaration order.
    pub fn load_flat_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(invalid_shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for l in self.layers.iter_mut().filter(|l| l.has_params()) {
            for w in l.weight.data_mut() {
                *w = it.next().expect("length checked");
            }
            for b in &mut l.bias {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub(crate) fn hash_pattern<H: Hasher>(&self, state: &mut H) {
        for l in &self.layers {
            l.hash_pattern(state);
        }
    }

    /// Hash of the ReLU masks and pooling routes of the last cached forward pass.
    pub fn activation_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash_pattern(&mut h);
        h.finish()
    }
}
