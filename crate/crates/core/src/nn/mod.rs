//! Differentiable kernels, layers and the Adam optimizer.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod pool;
mod tensor;

pub use activation::{relu_backward, relu_forward};
pub use adam::{Adam, AdamConfig};
pub use conv::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
    conv_transpose_output, ConvGrads,
};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use gradcheck::{grad_check, relative_error, BlockError, Differentiable, GradCheckConfig, GradCheckReport};
pub use layer::{Layer, LayerSpec, Sequential};
pub use loss::mse_loss;
pub use pool::{
    maxpool2d_backward, maxpool2d_forward, upsample_nearest_backward, upsample_nearest_forward,
};
pub use tensor::Tensor;
