//! Centroid-based clustering of latent codes: k-means, the Student-t soft
//! assignment with its sharpened target, joint fine-tuning of the
//! autoencoder, and the choice between soft and hard outputs.

mod joint;
mod kmeans;
mod select;
mod soft;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, invalid_shape, Result};
use crate::evaluation::RawScores;
use crate::nn::Tensor;
use crate::Scalar;

pub use joint::{joint_train, joint_train_with, JointConfig, JointEpoch, JointOutcome};
pub use kmeans::{hard_cluster, kmeans, KMeansOptions, KMeansOutcome};
pub use select::{qualitative_check, select_best, SelectionConfig, Violation};
pub use soft::{
    argmax_rows, clustering_grad_mu, clustering_grad_z, kl_divergence, soft_assign, target_distribution,
    SoftAssignment,
};

/// `k` cluster centres of dimension `dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids<T> {
    k: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Centroids<T> {
    pub fn new(k: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(invalid_param("centroids need k ≥ 1 and dim ≥ 1"));
        }
        if data.len() != k * dim {
            return Err(invalid_shape(format!(
                "{} values cannot form {k}×{dim} centroids",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid_param("centroids must be finite"));
        }
        Ok(Self { k, dim, data })
    }

    pub fn from_tensor(t: &Tensor<T>) -> Result<Self> {
        if t.shape().len() != 2 {
            return Err(invalid_shape(format!("centroids must be 2-D, got {:?}", t.shape())));
        }
        Self::new(t.shape()[0], t.shape()[1], t.data().to_vec())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor::from_vec(vec![self.k, self.dim], self.data.clone()).expect("consistent by construction")
    }
}

/// Which route produced a labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMode {
    /// Argmax of the soft assignment after joint training.
    SoftC1,
    /// k-means on the trained latent codes.
    HardC2,
    /// Winner of the soft/hard comparison.
    Selected,
}

impl ClusterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterMode::SoftC1 => "soft_c1",
            ClusterMode::HardC2 => "hard_c2",
            ClusterMode::Selected => "selected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStage {
    Qualitative,
    Quantitative,
}

/// How the soft/hard comparison was decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: ClusterMode,
    pub stage: SelectionStage,
    /// Both candidates failed the qualitative check.
    pub degenerate: bool,
    pub soft_violations: Vec<Violation>,
    pub hard_violations: Vec<Violation>,
    pub soft_scores: Option<RawScores>,
    pub hard_scores: Option<RawScores>,
    pub soft_eva: Option<f64>,
    pub hard_eva: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Algorithm that produced the labels.
    pub source: String,
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult<T> {
    pub labels: Vec<usize>,
    pub k: usize,
    pub mode: ClusterMode,
    pub centroids: Centroids<T>,
    pub seed: u64,
    pub provenance: Provenance,
    /// Sample indices acting as cluster representatives (medoid methods).
    pub medoids: Option<Vec<usize>>,
}

impl<T: Scalar> ClusteringResult<T> {
    pub fn new(
        labels: Vec<usize>,
        k: usize,
        mode: ClusterMode,
        centroids: Centroids<T>,
        seed: u64,
        source: &str,
    ) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(invalid_param(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self {
            labels,
            k,
            mode,
            centroids,
            seed,
            provenance: Provenance {
                source: source.to_string(),
                selection: None,
            },
            medoids: None,
        })
    }

    /// Number of samples per label, including empty clusters.
    pub fn sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.labels, self.k)
    }
}

pub fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

pub(crate) fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}
