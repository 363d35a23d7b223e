//! Deep convolutional clustering of univariate time series.
//!
//! Series are resampled, scaled to `[0, 1]` and stacked into overlapping-window
//! matrices ([`windowing`]); a convolutional autoencoder ([`dcae`]) built from
//! the kernels in [`nn`] learns a latent space that is refined with a
//! Student-t soft-assignment clustering loss ([`clustering`]). Soft and hard
//! cluster outputs are compared with a composite of silhouette,
//! Calinski–Harabasz and Davies–Bouldin scores ([`evaluation`]).

pub mod baselines;
pub mod clustering;
pub mod datagen;
pub mod dcae;
mod error;
pub mod evaluation;
pub mod nn;
pub mod pipeline;
pub mod rng;
mod scalar;
pub mod windowing;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use clustering::{Centroids, ClusterMode, ClusteringResult};
pub use dcae::{Dcae, DcaeArch};
pub use nn::Tensor;
pub use windowing::{SeriesMatrix, TimeSeries};

/// Double-precision tensor.
pub type Tensor64 = nn::Tensor<f64>;
/// Single-precision tensor.
pub type Tensor32 = nn::Tensor<f32>;
/// Double-precision autoencoder (the pipeline default).
pub type Dcae64 = dcae::Dcae<f64>;
/// Single-precision autoencoder.
pub type Dcae32 = dcae::Dcae<f32>;
pub type Centroids64 = clustering::Centroids<f64>;
pub type ClusteringResult64 = clustering::ClusteringResult<f64>;
