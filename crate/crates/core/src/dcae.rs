//! Convolutional autoencoder: conv/pool encoder, dense bottleneck, and a
//! deconvolution/upsampling decoder that mirrors it.

use std::hash::{DefaultHasher, Hasher};

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_shape, Error, Result};
use crate::nn::{mse_loss, Adam, AdamConfig, Differentiable, Layer, LayerSpec, Sequential, Tensor};
use crate::rng::{stream_rng, STREAM_INIT, STREAM_SHUFFLE};
use crate::Scalar;

/// Channel and width choices of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcaeArch {
    /// Filters of conv1..conv4.
    pub conv_filters: [usize; 4],
    /// Widths of the two dense layers between the flattened features and the latent layer.
    pub hidden: [usize; 2],
    pub latent_dim: usize,
}

impl Default for DcaeArch {
    fn default() -> Self {
        Self {
            conv_filters: [16, 32, 32, 64],
            hidden: [1028, 512],
            latent_dim: 128,
        }
    }
}

impl DcaeArch {
    pub fn with_latent(latent_dim: usize) -> Self {
        Self {
            latent_dim,
            ..Self::default()
        }
    }

    /// Same layer chain with narrow dense layers, for gradient checks.
    pub fn toy() -> Self {
        Self {
            conv_filters: [4, 8, 8, 8],
            hidden: [16, 8],
            latent_dim: 4,
        }
    }
}

/// Smallest input side the conv/pool chain accepts: 10 → 12 → 6 → 2 → 1.
pub const MIN_INPUT_SIDE: usize = 10;

#[derive(Debug, Clone)]
pub struct Dcae<T> {
    pub encoder: Sequential<T>,
    pub decoder: Sequential<T>,
    pub arch: DcaeArch,
    /// `(rows, cols)` of the input matrix.
    pub input_shape: (usize, usize),
    /// Feature map shape `(channels, h, w)` after conv4.
    pub feature_shape: (usize, usize, usize),
    /// Padding chosen for the final deconvolution.
    pub final_padding: (usize, usize),
}

fn conv(i: usize, o: usize, k: usize, p: usize) -> LayerSpec {
    LayerSpec::Conv {
        in_channels: i,
        out_channels: o,
        kernel: (k, k),
        stride: 1,
        padding: (p, p),
    }
}

fn deconv(i: usize, o: usize, k: usize, p: (usize, usize)) -> LayerSpec {
    LayerSpec::Deconv {
        in_channels: i,
        out_channels: o,
        kernel: (k, k),
        stride: 1,
        padding: p,
    }
}

fn dense(i: usize, o: usize) -> LayerSpec {
    LayerSpec::Dense {
        inputs: i,
        outputs: o,
    }
}

const POOL: LayerSpec = LayerSpec::MaxPool {
    window: 2,
    stride: 2,
};
const UP: LayerSpec = LayerSpec::Upsample { factor: 2 };

/// Padding for a 3×3, stride-1 deconvolution taking `pre` to `target`, plus
/// whether a crop/pad is still needed afterwards.
fn final_padding(pre: usize, target: usize) -> (usize, bool) {
    let full = pre + 2;
    if full < target {
        (0, true)
    } else {
        let excess = full - target;
        // Keep at least one output row.
        let p = (excess / 2).min((full - 1) / 2);
        (p, full - 2 * p != target)
    }
}

/// Named chain of specs, with ReLU after the layers flagged `true`.
fn trace(
    input: &[usize],
    chain: &[(&str, LayerSpec, bool)],
) -> Result<(Vec<(String, LayerSpec)>, Vec<usize>)> {
    let mut shape = input.to_vec();
    let mut out = Vec::new();
    for &(name, spec, relu) in chain {
        shape = spec
            .output_shape(&shape)
            .map_err(|e| invalid_shape(format!("layer {name} ({}): {e}", spec.kind())))?;
        out.push((name.to_string(), spec));
        if relu {
            out.push((format!("{name}_relu"), LayerSpec::Relu));
        }
    }
    Ok((out, shape))
}

fn instantiate<T: Scalar>(specs: Vec<(String, LayerSpec)>, rng: &mut crate::rng::Rng) -> Sequential<T> {
    Sequential::new(
        specs
            .into_iter()
            .map(|(name, spec)| Layer::glorot(name, spec, rng))
            .collect(),
    )
}

impl<T: Scalar> Dcae<T> {
    /// Builds the network for `rows×cols` inputs with seeded Glorot weights.
    pub fn build(rows: usize, cols: usize, arch: DcaeArch, seed: u64) -> Result<Self> {
        let [f1, f2, f3, f4] = arch.conv_filters;
        let [h1, h2] = arch.hidden;
        if arch.latent_dim == 0 || h1 == 0 || h2 == 0 || arch.conv_filters.contains(&0) {
            return Err(invalid_shape("layer widths must be positive"));
        }
        if rows == 0 || cols == 0 {
            return Err(invalid_shape("input matrix must be non-empty"));
        }
        let (conv_specs, fmap) = trace(
            &[1, rows, cols],
            &[
                ("conv1", conv(1, f1, 3, 2), true),
                ("maxpool1", POOL, false),
                ("conv2", conv(f1, f2, 5, 0), true),
                ("maxpool2", POOL, false),
                ("conv3", conv(f2, f3, 3, 1), true),
                ("conv4", conv(f3, f4, 3, 1), true),
            ],
        )?;
        let (c, fh, fw) = (fmap[0], fmap[1], fmap[2]);
        let flat = c * fh * fw;
        let (dense_specs, _) = trace(
            &[flat],
            &[
                ("fc1_en", dense(flat, flat), true),
                ("fc2_en", dense(flat, h1), true),
                ("fc3_en", dense(h1, h2), true),
                ("fc_latent", dense(h2, arch.latent_dim), true),
            ],
        )?;
        let mut encoder_specs = conv_specs;
        encoder_specs.push(("flatten".into(), LayerSpec::Flatten));
        encoder_specs.extend(dense_specs);

        let (mut decoder_specs, pre) = trace(
            &[arch.latent_dim],
            &[
                ("fc3_de", dense(arch.latent_dim, h2), true),
                ("fc2_de", dense(h2, h1), true),
                ("fc1_de", dense(h1, flat), true),
                (
                    "reshape",
                    LayerSpec::Reshape {
                        channels: c,
                        height: fh,
                        width: fw,
                    },
                    false,
                ),
                ("deconv4", deconv(f4, f3, 3, (1, 1)), true),
                ("deconv3", deconv(f3, f2, 3, (1, 1)), true),
                ("upsample2", UP, false),
                ("deconv2", deconv(f2, f1, 5, (0, 0)), true),
                ("upsample1", UP, false),
            ],
        )?;
        let (ph, fit_h) = final_padding(pre[1], rows);
        let (pw, fit_w) = final_padding(pre[2], cols);
        decoder_specs.push(("deconv1".into(), deconv(f1, 1, 3, (ph, pw))));
        if fit_h || fit_w {
            decoder_specs.push((
                "fit".into(),
                LayerSpec::Fit {
                    height: rows,
                    width: cols,
                },
            ));
        }

        let mut rng = stream_rng(seed, STREAM_INIT);
        let encoder = instantiate(encoder_specs, &mut rng);
        let decoder = instantiate(decoder_specs, &mut rng);
        let model = Self {
            encoder,
            decoder,
            arch,
            input_shape: (rows, cols),
            feature_shape: (c, fh, fw),
            final_padding: (ph, pw),
        };
        let out = model.decoder.output_shape(&[arch.latent_dim])?;
        if out != [1, rows, cols] {
            return Err(invalid_shape(format!(
                "decoder produces {out:?}, expected [1, {rows}, {cols}]"
            )));
        }
        debug!(
            "built autoencoder for {rows}×{cols}: flatten {flat}, final padding ({ph},{pw}), {} parameters",
            model.param_count()
        );
        Ok(model)
    }

    /// Reassembles a model from stored layer chains (used when loading).
    pub fn from_parts(
        encoder: Sequential<T>,
        decoder: Sequential<T>,
        arch: DcaeArch,
        input_shape: (usize, usize),
    ) -> Result<Self> {
        let (rows, cols) = input_shape;
        let latent = encoder.output_shape(&[1, rows, cols])?;
        if latent != [arch.latent_dim] {
            return Err(invalid_shape(format!(
                "encoder produces {latent:?}, expected [{}]",
                arch.latent_dim
            )));
        }
        let out = decoder.output_shape(&[arch.latent_dim])?;
        if out != [1, rows, cols] {
            return Err(invalid_shape(format!(
                "decoder produces {out:?}, expected [1, {rows}, {cols}]"
            )));
        }
        let (mut fshape, mut padding) = ((0, 0, 0), (0, 0));
        for l in &decoder.layers {
            match l.spec {
                LayerSpec::Reshape {
                    channels,
                    height,
                    width,
                } => fshape = (channels, height, width),
                LayerSpec::Deconv { padding: p, .. } => padding = p,
                _ => {}
            }
        }
        Ok(Self {
            encoder,
            decoder,
            arch,
            input_shape,
            feature_shape: fshape,
            final_padding: padding,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    /// Width of the flattened conv4 feature map (and of fc1).
    pub fn flatten_dim(&self) -> usize {
        let (c, h, w) = self.feature_shape;
        c * h * w
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    fn check_batch(&self, x: &Tensor<T>) -> Result<()> {
        let (r, c) = self.input_shape;
        if x.shape().len() != 4 || x.shape()[1..] != [1, r, c] {
            return Err(invalid_shape(format!(
                "expected an n×1×{r}×{c} batch, got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    /// Latent codes (`n×latent_dim`) for an `n×1×rows×cols` batch.
    pub fn encode(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(x)?;
        self.encoder.infer(x)
    }

    /// Reconstructions (`n×1×rows×cols`) for `n×latent_dim` codes.
    pub fn decode(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        if z.shape().len() != 2 || z.shape()[1] != self.arch.latent_dim {
            return Err(invalid_shape(format!(
                "expected n×{} latent codes, got {:?}",
                self.arch.latent_dim,
                z.shape()
            )));
        }
        self.decoder.infer(z)
    }

    /// Encodes a large batch in chunks to bound activation memory.
    pub fn encode_all(&self, x: &Tensor<T>, chunk: usize) -> Result<Tensor<T>> {
        self.check_batch(x)?;
        let n = x.rows();
        let chunk = chunk.max(1);
        let mut data = Vec::with_capacity(n * self.arch.latent_dim);
        let idx: Vec<usize> = (0..n).collect();
        for part in idx.chunks(chunk) {
            data.extend_from_slice(self.encoder.infer(&x.gather_rows(part))?.data());
        }
        Tensor::from_vec(vec![n, self.arch.latent_dim], data)
    }

    /// Mean per-sample reconstruction error over a dataset.
    pub fn reconstruction_loss(&self, x: &Tensor<T>, chunk: usize) -> Result<T> {
        let n = x.rows();
        let mut total = T::zero();
        let idx: Vec<usize> = (0..n).collect();
        for part in idx.chunks(chunk.max(1)) {
            let batch = x.gather_rows(part);
            let recon = self.decode(&self.encode(&batch)?)?;
            let (l, _) = mse_loss(&batch, &recon)?;
            total += l * T::of(part.len());
        }
        Ok(total / T::of(n.max(1)))
    }

    /// Sets every parameter to `value` (test fixtures).
    pub fn fill_params(&mut self, value: T) {
        for (p, _) in self.encoder.param_pairs().into_iter().chain(self.decoder.param_pairs()) {
            p.fill(value);
        }
    }

    /// Parameters of encoder then decoder, in declaration order.
    pub fn flat_params(&self) -> Vec<T> {
        let mut v = self.encoder.flat_params();
        v.extend(self.decoder.flat_params());
        v
    }

    /// Gradient-accumulating training forward pass: `(z, x̂)`.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        self.check_batch(x)?;
        let z = self.encoder.forward(x.clone(), true)?;
        let recon = self.decoder.forward(z.clone(), true)?;
        Ok((z, recon))
    }

    pub fn zero_grad(&mut self) {
        self.encoder.zero_grad();
        self.decoder.zero_grad();
    }
}

impl<T: Scalar> Differentiable<T> for Dcae<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(Dcae::forward_train(self, x)?.1)
    }

    fn backward_input(&mut self, upstream: Tensor<T>) -> Result<Tensor<T>> {
        let dz = self.decoder.backward(upstream)?;
        self.encoder.backward(dz)
    }

    fn zero_grad(&mut self) {
        Dcae::zero_grad(self)
    }

    fn block_names(&self) -> Vec<String> {
        let enc = self.encoder.block_names().into_iter().map(|n| format!("encoder.{n}"));
        let dec = self.decoder.block_names().into_iter().map(|n| format!("decoder.{n}"));
        enc.chain(dec).collect()
    }

    fn param_pairs(&mut self) -> Vec<(&mut [T], &[T])> {
        let mut v = self.encoder.param_pairs();
        v.extend(self.decoder.param_pairs());
        v
    }

    fn activation_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.encoder.hash_pattern(&mut h);
        self.decoder.hash_pattern(&mut h);
        h.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Reconstruction-only training. Returns the mean per-sample loss of each epoch.
///
/// Minibatch order is reshuffled every epoch from the seed's shuffle stream.
pub fn pretrain<T: Scalar>(model: &mut Dcae<T>, data: &Tensor<T>, cfg: &PretrainConfig) -> Result<Vec<T>> {
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr));
    pretrain_with(model, data, cfg, &mut opt)
}

/// [`pretrain`] continuing from an existing optimizer state.
pub fn pretrain_with<T: Scalar>(
    model: &mut Dcae<T>,
    data: &Tensor<T>,
    cfg: &PretrainConfig,
    opt: &mut Adam<T>,
) -> Result<Vec<T>> {
    if data.rows() == 0 {
        return Err(invalid_input("pretraining needs at least one sample"));
    }
    model.check_batch(data)?;
    let n = data.rows();
    let mut rng = stream_rng(cfg.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = T::zero();
        for idx in order.chunks(cfg.batch_size.max(1)) {
            let batch = data.gather_rows(idx);
            model.zero_grad();
            let (_, recon) = model.forward_train(&batch)?;
            let (loss, grad) = mse_loss(&batch, &recon)?;
            let dz = model.decoder.backward(grad)?;
            model.encoder.backward(dz)?;
            opt.step(model.encoder.param_pairs().into_iter().chain(model.decoder.param_pairs()))?;
            total += loss * T::of(idx.len());
        }
        let mean = total / T::of(n);
        if !mean.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: "non-finite reconstruction loss".into(),
            });
        }
        debug!("pretrain epoch {epoch}: loss {mean}");
        history.push(mean);
    }
    model.encoder.clear_cache();
    model.decoder.clear_cache();
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_trace() {
        let m = Dcae::<f64>::build(32, 32, DcaeArch::default(), 0).unwrap();
        assert_eq!(m.flatten_dim(), 2304);
        assert_eq!(m.latent_dim(), 128);
        assert_eq!(m.final_padding, (1, 1));
        assert!(m.decoder.layers.iter().all(|l| l.spec.kind() != "fit"));
    }

    #[test]
    fn trace_24() {
        let m = Dcae::<f64>::build(24, 24, DcaeArch::default(), 0).unwrap();
        assert_eq!(m.feature_shape, (64, 4, 4));
        assert_eq!(m.flatten_dim(), 1024);
    }

    #[test]
    fn odd_rows_fall_back_to_crop() {
        let m = Dcae::<f64>::build(25, 32, DcaeArch::default(), 0).unwrap();
        assert_eq!(m.decoder.layers.last().unwrap().spec.kind(), "fit");
        let z = Tensor::zeros(vec![2, 128]);
        assert_eq!(m.decode(&z).unwrap().shape(), &[2, 1, 25, 32]);
    }

    #[test]
    fn too_small_names_layer() {
        let err = Dcae::<f64>::build(9, 32, DcaeArch::default(), 0).unwrap_err().to_string();
        assert!(err.contains("maxpool2"), "{err}");
        assert!(Dcae::<f64>::build(MIN_INPUT_SIDE, MIN_INPUT_SIDE, DcaeArch::toy(), 0).is_ok());
    }

    #[test]
    fn final_padding_rule() {
        assert_eq!(final_padding(32, 32), (1, false));
        assert_eq!(final_padding(24, 25), (0, true));
        assert_eq!(final_padding(24, 16), (5, false));
        assert_eq!(final_padding(4, 10), (0, true));
    }

    #[test]
    fn zero_weights_give_zero_latents() {
        let mut m = Dcae::<f64>::build(16, 16, DcaeArch::toy(), 3).unwrap();
        m.fill_params(0.0);
        let x = Tensor::from_vec(vec![2, 1, 16, 16], (0..512).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
        assert!(m.encode(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_rows_are_independent() {
        let m = Dcae::<f64>::build(12, 12, DcaeArch::toy(), 5).unwrap();
        let x = Tensor::from_vec(vec![3, 1, 12, 12], (0..432).map(|i| ((i * 37) % 101) as f64 / 101.0).collect()).unwrap();
        let all = m.encode(&x).unwrap();
        let one = m.encode(&x.gather_rows(&[1])).unwrap();
        assert_eq!(one.data(), all.row(1));
        assert_eq!(m.encode(&x).unwrap(), all);
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let mut m = Dcae::<f64>::build(12, 12, DcaeArch::toy(), 5).unwrap();
        let before = m.flat_params();
        let x = Tensor::zeros(vec![4, 1, 12, 12]);
        let h = pretrain(&mut m, &x, &PretrainConfig { epochs: 0, ..Default::default() }).unwrap();
        assert!(h.is_empty());
        assert_eq!(m.flat_params(), before);
        assert!(pretrain(&mut m, &Tensor::zeros(vec![0, 1, 12, 12]), &PretrainConfig::default()).is_err());
    }
}
