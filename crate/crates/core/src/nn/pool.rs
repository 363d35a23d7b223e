//! Max pooling and nearest-neighbour upsampling.

use crate::error::{invalid_shape, Result};
use crate::nn::Tensor;
use crate::Scalar;

/// Max pooling over `window×window` blocks.
///
/// Returns the pooled batch and, per output element, the flat index into the
/// input data of the selected maximum. Ties keep the first element in
/// row-major scan order.
pub fn maxpool2d_forward<T: Scalar>(
    input: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = input.dims4("maxpool input")?;
    if window == 0 || stride == 0 {
        return Err(invalid_shape("pool window and stride must be positive"));
    }
    if h < window || w < window {
        return Err(invalid_shape(format!(
            "maxpool window {window} exceeds {h}×{w} input"
        )));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let mut argmax = vec![0usize; n * c * oh * ow];
    let x = input.data();
    let y = out.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for dy in 0..window {
                    for dx in 0..window {
                        let i = base + (oy * stride + dy) * w + ox * stride + dx;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                let o = (plane * oh + oy) * ow + ox;
                y[o] = x[best];
                argmax[o] = best;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each upstream value to the input position recorded in `argmax`.
pub fn maxpool2d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != upstream.len() {
        return Err(invalid_shape(format!(
            "maxpool backward: {} routes for {} upstream values",
            argmax.len(),
            upstream.len()
        )));
    }
    let mut grad = Tensor::zeros(input_shape.to_vec());
    let g = grad.data_mut();
    for (&i, &v) in argmax.iter().zip(upstream.data()) {
        g[i] += v;
    }
    Ok(grad)
}

/// Nearest-neighbour upsampling: every pixel becomes a `factor×factor` block.
pub fn upsample_nearest_forward<T: Scalar>(input: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4("upsample input")?;
    if factor == 0 {
        return Err(invalid_shape("upsample factor must be positive"));
    }
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let x = input.data();
    let y = out.data_mut();
    for plane in 0..n * c {
        for oy in 0..oh {
            let src = &x[plane * h * w + (oy / factor) * w..][..w];
            let dst = &mut y[(plane * oh + oy) * ow..][..ow];
            for (ox, d) in dst.iter_mut().enumerate() {
                *d = src[ox / factor];
            }
        }
    }
    Ok(out)
}

/// Adjoint of upsampling: sums each replicated block.
pub fn upsample_nearest_backward<T: Scalar>(upstream: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let (n, c, oh, ow) = upstream.dims4("upsample upstream")?;
    if factor == 0 || oh % factor != 0 || ow % factor != 0 {
        return Err(invalid_shape(format!(
            "upstream {oh}×{ow} is not a multiple of factor {factor}"
        )));
    }
    let (h, w) = (oh / factor, ow / factor);
    let mut grad = Tensor::zeros(vec![n, c, h, w]);
    let dy = upstream.data();
    let g = grad.data_mut();
    for plane in 0..n * c {
        for oy in 0..oh {
            let src = &dy[(plane * oh + oy) * ow..][..ow];
            let dst = &mut g[plane * h * w + (oy / factor) * w..][..w];
            for (ox, &v) in src.iter().enumerate() {
                dst[ox / factor] += v;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn single_window_pool() {
        let x = t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let (y, idx) = maxpool2d_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let g = maxpool2d_backward(x.shape(), &idx, &t(&[1, 1, 1, 1], &[1.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn odd_input_floors() {
        let x = Tensor::<f64>::zeros(vec![1, 3, 13, 13]);
        let (y, _) = maxpool2d_forward(&x, 2, 2).unwrap();
        assert_eq!(y.shape(), &[1, 3, 6, 6]);
    }

    #[test]
    fn ties_route_to_first_index() {
        let x = t(&[1, 1, 2, 2], &[7.0; 4]);
        let (_, idx) = maxpool2d_forward(&x, 2, 2).unwrap();
        let g = maxpool2d_backward(x.shape(), &idx, &t(&[1, 1, 1, 1], &[2.5])).unwrap();
        assert_eq!(g.data(), &[2.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pool_rejects_small_input() {
        assert!(maxpool2d_forward(&Tensor::<f64>::zeros(vec![1, 1, 1, 4]), 2, 2).is_err());
    }

    #[test]
    fn upsample_replicates() {
        let y = upsample_nearest_forward(&t(&[1, 1, 1, 1], &[1.0]), 2).unwrap();
        assert_eq!(y.data(), &[1.0; 4]);
        let g = upsample_nearest_backward(&t(&[1, 1, 2, 2], &[1.0; 4]), 2).unwrap();
        assert_eq!(g.data(), &[4.0]);
        let big = upsample_nearest_forward(&Tensor::<f64>::zeros(vec![2, 3, 6, 6]), 2).unwrap();
        assert_eq!(big.shape(), &[2, 3, 12, 12]);
    }

    proptest! {
        #[test]
        fn pool_backward_conserves_mass(x in proptest::collection::vec(-5.0f64..5.0, 2 * 5 * 6),
                                        dy in proptest::collection::vec(-5.0f64..5.0, 2 * 2 * 3)) {
            let x = t(&[1, 2, 5, 6], &x);
            let (_, idx) = maxpool2d_forward(&x, 2, 2).unwrap();
            let dy = t(&[1, 2, 2, 3], &dy);
            let g = maxpool2d_backward(x.shape(), &idx, &dy).unwrap();
            let a: f64 = g.data().iter().sum();
            let b: f64 = dy.data().iter().sum();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn upsample_is_adjoint(x in proptest::collection::vec(-5.0f64..5.0, 2 * 3 * 4),
                               y in proptest::collection::vec(-5.0f64..5.0, 2 * 6 * 8)) {
            let x = t(&[1, 2, 3, 4], &x);
            let y = t(&[1, 2, 6, 8], &y);
            let lhs = upsample_nearest_forward(&x, 2).unwrap().dot(&y);
            let rhs = x.dot(&upsample_nearest_backward(&y, 2).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
