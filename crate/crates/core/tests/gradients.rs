//! Library gradient checker applied to each layer kind and the toy network.

use rand::Rng;
use tsidec::dcae::{Dcae, DcaeArch};
use tsidec::nn::{grad_check, Differentiable, GradCheckConfig, Layer, LayerSpec, Sequential, Tensor};
use tsidec::rng::stream_rng;

fn random(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
    let mut rng = stream_rng(seed, 0);
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn chain(specs: &[LayerSpec], seed: u64) -> Sequential<f64> {
    let mut rng = stream_rng(seed, 1);
    let layers = specs
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut l = Layer::glorot(format!("l{i}"), s, &mut rng);
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
            l
        })
        .collect();
    Sequential::new(layers)
}

fn assert_close(model: &mut impl Differentiable<f64>, x: &Tensor<f64>) {
    let report = grad_check(model, x, GradCheckConfig::default()).unwrap();
    for b in &report.blocks {
        assert!(b.max_rel_error < 1e-4, "{}: {:.2e}", b.name, b.max_rel_error);
        assert!(b.checked > 0 || b.skipped > 0, "{} checked nothing", b.name);
    }
}

#[test]
fn conv_relu_pool_dense() {
    let specs = [
        LayerSpec::Conv { in_channels: 1, out_channels: 3, kernel: (3, 3), stride: 1, padding: (1, 1) },
        LayerSpec::Relu,
        LayerSpec::MaxPool { window: 2, stride: 2 },
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: 3 * 3 * 3, outputs: 4 },
    ];
    for seed in 0..5 {
        assert_close(&mut chain(&specs, seed), &random(vec![2, 1, 6, 6], seed));
    }
}

#[test]
fn decoder_side_layers() {
    let specs = [
        LayerSpec::Dense { inputs: 5, outputs: 2 * 3 * 3 },
        LayerSpec::Reshape { channels: 2, height: 3, width: 3 },
        LayerSpec::Upsample { factor: 2 },
        LayerSpec::Deconv { in_channels: 2, out_channels: 1, kernel: (5, 5), stride: 1, padding: (0, 0) },
        LayerSpec::Fit { height: 8, width: 11 },
    ];
    for seed in 0..5 {
        assert_close(&mut chain(&specs, seed), &random(vec![3, 5], 10 + seed));
    }
}

#[test]
fn strided_conv_and_deconv() {
    let specs = [
        LayerSpec::Conv { in_channels: 2, out_channels: 2, kernel: (3, 2), stride: 2, padding: (1, 0) },
        LayerSpec::Deconv { in_channels: 2, out_channels: 3, kernel: (2, 3), stride: 2, padding: (1, 1) },
    ];
    assert_close(&mut chain(&specs, 3), &random(vec![1, 2, 7, 6], 3));
}

#[test]
fn toy_autoencoder() {
    for (seed, side) in [(0, 10), (1, 12), (2, 13)] {
        let mut model = Dcae::<f64>::build(side, side, DcaeArch::toy(), seed).unwrap();
        let x = random(vec![2, 1, side, side], 20 + seed).map(|v| v.abs());
        let cfg = GradCheckConfig {
            step: 1e-3,
            max_coords_per_block: Some(20),
            seed,
            ..GradCheckConfig::default()
        };
        let report = grad_check(&mut model, &x, cfg).unwrap();
        assert!(report.passes(1e-4), "{:?}", report.blocks);
    }
}
