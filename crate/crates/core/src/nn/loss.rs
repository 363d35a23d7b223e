use crate::error::{invalid_shape, Result};
use crate::nn::Tensor;
use crate::Scalar;

/// Batch-mean squared reconstruction error `(1/m)·Σᵢ‖xᵢ − x̂ᵢ‖²` and its
/// gradient `(2/m)(x̂ − x)` with respect to `x_hat`.
pub fn mse_loss<T: Scalar>(x: &Tensor<T>, x_hat: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if x.shape() != x_hat.shape() {
        return Err(invalid_shape(format!(
            "mse: target {:?} vs reconstruction {:?}",
            x.shape(),
            x_hat.shape()
        )));
    }
    let m = T::of(x.rows().max(1));
    let two_over_m = T::lit(2.0) / m;
    let mut sum = T::zero();
    let grad = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(&a, &b)| {
            let d = b - a;
            sum += d * d;
            two_over_m * d
        })
        .collect();
    Ok((sum / m, Tensor::from_vec(x.shape().to_vec(), grad)?))
}
