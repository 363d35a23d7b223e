//! Cross-correlation and its transpose, lowered to matrix products via im2col.

use crate::error::{invalid_shape, Result};
use crate::nn::Tensor;
use crate::Scalar;

/// Sliding geometry of a `kh×kw` kernel over a zero-padded `c×ih×iw` image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub c: usize,
    pub ih: usize,
    pub iw: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub ph: usize,
    pub pw: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Geometry {
    pub fn new(
        c: usize,
        (ih, iw): (usize, usize),
        (kh, kw): (usize, usize),
        stride: usize,
        (ph, pw): (usize, usize),
    ) -> Result<Self> {
        if stride == 0 || kh == 0 || kw == 0 {
            return Err(invalid_shape("kernel and stride must be positive"));
        }
        if ih + 2 * ph < kh || iw + 2 * pw < kw {
            return Err(invalid_shape(format!(
                "kernel {kh}×{kw} does not fit a {ih}×{iw} input with padding ({ph},{pw})"
            )));
        }
        Ok(Self {
            c,
            ih,
            iw,
            kh,
            kw,
            stride,
            ph,
            pw,
            oh: (ih + 2 * ph - kh) / stride + 1,
            ow: (iw + 2 * pw - kw) / stride + 1,
        })
    }

    /// Rows of the column matrix (`c·kh·kw`).
    pub fn patch_len(&self) -> usize {
        self.c * self.kh * self.kw
    }

    /// Columns of the column matrix (`oh·ow`).
    pub fn positions(&self) -> usize {
        self.oh * self.ow
    }

    #[inline]
    fn src(&self, o: usize, k: usize, pad: usize, limit: usize) -> Option<usize> {
        let i = (o * self.stride + k).checked_sub(pad)?;
        (i < limit).then_some(i)
    }

    pub fn im2col<T: Scalar>(&self, img: &[T], cols: &mut [T]) {
        let p = self.positions();
        for c in 0..self.c {
            let plane = &img[c * self.ih * self.iw..(c + 1) * self.ih * self.iw];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((c * self.kh + ki) * self.kw + kj) * p;
                    for oy in 0..self.oh {
                        let dst = &mut cols[row + oy * self.ow..row + (oy + 1) * self.ow];
                        match self.src(oy, ki, self.ph, self.ih) {
                            None => dst.fill(T::zero()),
                            Some(iy) => {
                                let line = &plane[iy * self.iw..(iy + 1) * self.iw];
                                for (ox, d) in dst.iter_mut().enumerate() {
                                    *d = match self.src(ox, kj, self.pw, self.iw) {
                                        Some(ix) => line[ix],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Geometry::im2col`]: scatters columns back, accumulating.
    pub fn col2im<T: Scalar>(&self, cols: &[T], img: &mut [T]) {
        let p = self.positions();
        for c in 0..self.c {
            let plane = &mut img[c * self.ih * self.iw..(c + 1) * self.ih * self.iw];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((c * self.kh + ki) * self.kw + kj) * p;
                    for oy in 0..self.oh {
                        let Some(iy) = self.src(oy, ki, self.ph, self.ih) else {
                            continue;
                        };
                        let src = &cols[row + oy * self.ow..row + (oy + 1) * self.ow];
                        for (ox, &v) in src.iter().enumerate() {
                            if let Some(ix) = self.src(ox, kj, self.pw, self.iw) {
                                plane[iy * self.iw + ix] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of a convolution-type layer.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

fn kernel_dims<T: Scalar>(weight: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    weight.dims4("kernel")
}

fn check_bias<T>(bias: &[T], n: usize) -> Result<()> {
    if bias.len() != n {
        return Err(invalid_shape(format!(
            "bias has {} entries, expected {n}",
            bias.len()
        )));
    }
    Ok(())
}

fn conv_geometry<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: (usize, usize),
) -> Result<(usize, usize, Geometry)> {
    let (n, ci, h, w) = input.dims4("conv2d input")?;
    let (co, wci, kh, kw) = kernel_dims(weight)?;
    if wci != ci {
        return Err(invalid_shape(format!(
            "conv2d: input has {ci} channels, kernel expects {wci}"
        )));
    }
    Ok((n, co, Geometry::new(ci, (h, w), (kh, kw), stride, padding)?))
}

/// Cross-correlation of an `n×c_in×h×w` batch with `c_out×c_in×kh×kw` kernels.
///
/// Output spatial size is `⌊(h + 2p − kh)/stride⌋ + 1` per dimension.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &[T],
    stride: usize,
    padding: (usize, usize),
) -> Result<Tensor<T>> {
    let (n, co, g) = conv_geometry(input, weight, stride, padding)?;
    check_bias(bias, co)?;
    let (kl, p) = (g.patch_len(), g.positions());
    let mut out = Tensor::zeros(vec![n, co, g.oh, g.ow]);
    let mut cols = vec![T::zero(); kl * p];
    for s in 0..n {
        g.im2col(input.row(s), &mut cols);
        let y = out.row_mut(s);
        T::gemm(co, kl, p, T::one(), weight.data(), kl, 1, &cols, p, 1, T::zero(), y, p, 1);
        for (chan, &b) in y.chunks_mut(p).zip(bias) {
            chan.iter_mut().for_each(|v| *v += b);
        }
    }
    Ok(out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    upstream: &Tensor<T>,
    stride: usize,
    padding: (usize, usize),
) -> Result<ConvGrads<T>> {
    let (n, co, g) = conv_geometry(input, weight, stride, padding)?;
    upstream.expect_shape(&[n, co, g.oh, g.ow], "conv2d upstream")?;
    let (kl, p) = (g.patch_len(), g.positions());
    let mut grad_in = Tensor::zeros(input.shape().to_vec());
    let mut grad_w = Tensor::zeros(weight.shape().to_vec());
    let mut grad_b = vec![T::zero(); co];
    let mut cols = vec![T::zero(); kl * p];
    let mut dcols = vec![T::zero(); kl * p];
    for s in 0..n {
        let dy = upstream.row(s);
        g.im2col(input.row(s), &mut cols);
        T::gemm(co, p, kl, T::one(), dy, p, 1, &cols, 1, p, T::one(), grad_w.data_mut(), kl, 1);
        T::gemm(kl, co, p, T::one(), weight.data(), 1, kl, dy, p, 1, T::zero(), &mut dcols, p, 1);
        g.col2im(&dcols, grad_in.row_mut(s));
        for (gb, chan) in grad_b.iter_mut().zip(dy.chunks(p)) {
            *gb += chan.iter().copied().sum::<T>();
        }
    }
    Ok(ConvGrads {
        input: grad_in,
        weight: grad_w,
        bias: grad_b,
    })
}

/// Spatial output size of a transposed convolution: `(h−1)·stride − 2p + k`.
pub fn conv_transpose_output(h: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let full = (h.max(1) - 1) * stride + k;
    if h == 0 || full <= 2 * pad {
        return Err(invalid_shape(format!(
            "transposed convolution of size {h} with kernel {k}, stride {stride}, padding {pad} has non-positive output"
        )));
    }
    Ok(full - 2 * pad)
}

fn deconv_geometry<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: (usize, usize),
) -> Result<(usize, usize, usize, Geometry)> {
    let (n, ci, h, w) = input.dims4("deconv input")?;
    let (wci, co, kh, kw) = kernel_dims(weight)?;
    if wci != ci {
        return Err(invalid_shape(format!(
            "deconv: input has {ci} channels, kernel expects {wci}"
        )));
    }
    let oh = conv_transpose_output(h, kh, stride, padding.0)?;
    let ow = conv_transpose_output(w, kw, stride, padding.1)?;
    // Geometry of the forward convolution this layer is the adjoint of.
    let g = Geometry::new(co, (oh, ow), (kh, kw), stride, padding)?;
    debug_assert_eq!((g.oh, g.ow), (h, w));
    Ok((n, ci, co, g))
}

/// Transposed convolution with `c_in×c_out×kh×kw` kernels (the adjoint of
/// [`conv2d_forward`] with respect to its input, plus a bias).
pub fn conv_transpose2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &[T],
    stride: usize,
    padding: (usize, usize),
) -> Result<Tensor<T>> {
    let (n, ci, co, g) = deconv_geometry(input, weight, stride, padding)?;
    check_bias(bias, co)?;
    let (kl, p) = (g.patch_len(), g.positions());
    let plane = g.ih * g.iw;
    let mut out = Tensor::zeros(vec![n, co, g.ih, g.iw]);
    let mut cols = vec![T::zero(); kl * p];
    for s in 0..n {
        T::gemm(kl, ci, p, T::one(), weight.data(), 1, kl, input.row(s), p, 1, T::zero(), &mut cols, p, 1);
        let y = out.row_mut(s);
        g.col2im(&cols, y);
        for (chan, &b) in y.chunks_mut(plane).zip(bias) {
            chan.iter_mut().for_each(|v| *v += b);
        }
    }
    Ok(out)
}

pub fn conv_transpose2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    upstream: &Tensor<T>,
    stride: usize,
    padding: (usize, usize),
) -> Result<ConvGrads<T>> {
    let (n, ci, co, g) = deconv_geometry(input, weight, stride, padding)?;
    upstream.expect_shape(&[n, co, g.ih, g.iw], "deconv upstream")?;
    let (kl, p) = (g.patch_len(), g.positions());
    let plane = g.ih * g.iw;
    let mut grad_in = Tensor::zeros(input.shape().to_vec());
    let mut grad_w = Tensor::zeros(weight.shape().to_vec());
    let mut grad_b = vec![T::zero(); co];
    let mut dcols = vec![T::zero(); kl * p];
    for s in 0..n {
        let dy = upstream.row(s);
        g.im2col(dy, &mut dcols);
        T::gemm(ci, kl, p, T::one(), weight.data(), kl, 1, &dcols, p, 1, T::zero(), grad_in.row_mut(s), p, 1);
        T::gemm(ci, p, kl, T::one(), input.row(s), p, 1, &dcols, 1, p, T::one(), grad_w.data_mut(), kl, 1);
        for (gb, chan) in grad_b.iter_mut().zip(dy.chunks(plane)) {
            *gb += chan.iter().copied().sum::<T>();
        }
    }
    Ok(ConvGrads {
        input: grad_in,
        weight: grad_w,
        bias: grad_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn all_ones_kernel_sums_window() {
        let x = t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let w = t(&[1, 1, 2, 2], &[1.0; 4]);
        let y = conv2d_forward(&x, &w, &[0.0], 1, (0, 0)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn unit_kernel_is_identity() {
        let x = t(&[1, 1, 3, 3], &[1.0, -2.0, 3.0, 4.0, 5.0, -6.0, 7.0, 8.0, 9.0]);
        let w = t(&[1, 1, 1, 1], &[1.0]);
        assert_eq!(conv2d_forward(&x, &w, &[0.0], 1, (0, 0)).unwrap(), x);
        assert_eq!(conv_transpose2d_forward(&x, &w, &[0.0], 1, (0, 0)).unwrap(), x);
    }

    #[test]
    fn padded_conv_output_size() {
        let x = Tensor::<f64>::zeros(vec![1, 1, 32, 32]);
        let w = Tensor::zeros(vec![16, 1, 3, 3]);
        let y = conv2d_forward(&x, &w, &[0.0; 16], 1, (2, 2)).unwrap();
        assert_eq!(y.shape(), &[1, 16, 34, 34]);
    }

    #[test]
    fn strided_conv_by_hand() {
        // 1×3×3, kernel 2×2 ones, stride 2, padding 1: corners of the padded grid.
        let x = t(&[1, 1, 3, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let w = t(&[1, 1, 2, 2], &[1.0; 4]);
        let y = conv2d_forward(&x, &w, &[0.5], 2, (1, 1)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[1.5, 5.5, 11.5, 28.5]);
    }

    #[test]
    fn transposed_output_sizes() {
        assert_eq!(conv_transpose_output(12, 5, 1, 0).unwrap(), 16);
        assert_eq!(conv_transpose_output(32, 3, 1, 1).unwrap(), 32);
        assert_eq!(conv_transpose_output(32, 3, 1, 2).unwrap(), 30);
        assert!(conv_transpose_output(1, 3, 1, 2).is_err());
    }

    #[test]
    fn transposed_conv_by_hand() {
        // Single pixel scattered through a 2×2 kernel with stride 2.
        let x = t(&[1, 1, 1, 2], &[1.0, 2.0]);
        let w = t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let y = conv_transpose2d_forward(&x, &w, &[0.0], 2, (0, 0)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 4]);
        assert_eq!(y.data(), &[1.0, 2.0, 2.0, 4.0, 3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = t(&[1, 1, 3, 3], &[0.3; 9]);
        let w = t(&[2, 1, 2, 2], &[0.7; 8]);
        let dy = Tensor::zeros(vec![1, 2, 2, 2]);
        let g = conv2d_backward(&x, &w, &dy, 1, (0, 0)).unwrap();
        assert!(g.input.data().iter().chain(g.weight.data()).chain(&g.bias).all(|&v| v == 0.0));
    }

    #[test]
    fn bias_gradient_is_spatial_sum() {
        let x = t(&[1, 1, 3, 3], &[0.1; 9]);
        let w = t(&[2, 1, 2, 2], &[0.2; 8]);
        let dy = t(&[1, 2, 2, 2], &[1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.5, 0.0]);
        let g = conv2d_backward(&x, &w, &dy, 1, (0, 0)).unwrap();
        assert_eq!(g.bias, vec![10.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let x = Tensor::<f64>::zeros(vec![1, 2, 4, 4]);
        let w = Tensor::zeros(vec![1, 3, 3, 3]);
        assert!(conv2d_forward(&x, &w, &[0.0], 1, (0, 0)).is_err());
        let w = Tensor::zeros(vec![1, 2, 5, 5]);
        assert!(conv2d_forward(&x, &w, &[0.0], 1, (0, 0)).is_err());
        let w = Tensor::zeros(vec![1, 2, 3, 3]);
        let dy = Tensor::zeros(vec![1, 1, 3, 3]);
        assert!(conv2d_backward(&x, &w, &dy, 1, (0, 0)).is_err());
    }
}
