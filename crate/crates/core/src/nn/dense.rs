use crate::error::{invalid_shape, Result};
use crate::nn::Tensor;
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

fn dims<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (outs, ins) = match weight.shape() {
        &[o, i] => (o, i),
        s => return Err(invalid_shape(format!("dense weight must be 2-D, got {s:?}"))),
    };
    let m = input.rows();
    if input.row_len() != ins {
        return Err(invalid_shape(format!(
            "dense layer expects {ins} inputs per sample, got {}",
            input.row_len()
        )));
    }
    Ok((m, ins, outs))
}

/// `y = x·Wᵀ + b` for a batch `x` of shape `m×in` and `W` of shape `out×in`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &[T]) -> Result<Tensor<T>> {
    let (m, ins, outs) = dims(input, weight)?;
    if bias.len() != outs {
        return Err(invalid_shape(format!("dense bias has {} entries, expected {outs}", bias.len())));
    }
    let mut y = Tensor::zeros(vec![m, outs]);
    for row in y.data_mut().chunks_mut(outs) {
        row.copy_from_slice(bias);
    }
    T::gemm(m, ins, outs, T::one(), input.data(), ins, 1, weight.data(), 1, ins, T::one(), y.data_mut(), outs, 1);
    Ok(y)
}

pub fn dense_backward<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, upstream: &Tensor<T>) -> Result<DenseGrads<T>> {
    let (m, ins, outs) = dims(input, weight)?;
    upstream.expect_shape(&[m, outs], "dense upstream")?;
    let mut grad_in = Tensor::zeros(input.shape().to_vec());
    let mut grad_w = Tensor::zeros(vec![outs, ins]);
    let dy = upstream.data();
    T::gemm(m, outs, ins, T::one(), dy, outs, 1, weight.data(), ins, 1, T::zero(), grad_in.data_mut(), ins, 1);
    T::gemm(outs, m, ins, T::one(), dy, 1, outs, input.data(), ins, 1, T::zero(), grad_w.data_mut(), ins, 1);
    let mut grad_b = vec![T::zero(); outs];
    for row in dy.chunks(outs) {
        for (g, &v) in grad_b.iter_mut().zip(row) {
            *g += v;
        }
    }
    Ok(DenseGrads {
        input: grad_in,
        weight: grad_w,
        bias: grad_b,
    })
}
