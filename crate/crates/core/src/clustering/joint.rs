//! Joint fine-tuning: reconstruction plus weighted KL clustering loss.

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    argmax_rows, clustering_grad_mu, clustering_grad_z, kl_divergence, kmeans, soft_assign, target_distribution,
    Centroids, ClusterMode, ClusteringResult, KMeansOptions,
};
use crate::dcae::Dcae;
use crate::error::{invalid_param, Error, Result};
use crate::nn::{mse_loss, Adam, AdamConfig, Tensor};
use crate::rng::{stream_rng, STREAM_SHUFFLE};
use crate::Scalar;

/// Inference chunk size when encoding the whole dataset.
const ENCODE_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    /// Weight of the clustering loss.
    pub gamma: f64,
    /// Degrees of freedom of the Student-t kernel.
    pub alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop once fewer than this fraction of argmax labels change between
    /// target refreshes.
    pub tol: f64,
    pub seed: u64,
    pub kmeans: KMeansOptions,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            alpha: 1.0,
            lr: 1e-3,
            batch_size: 32,
            epochs: 1000,
            tol: 1e-3,
            seed: 0,
            kmeans: KMeansOptions::default(),
        }
    }
}

/// Per-epoch averages (per sample) and the label churn at the refresh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointEpoch {
    pub epoch: usize,
    pub reconstruction: f64,
    pub clustering: f64,
    pub total: f64,
    pub changed_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct JointOutcome<T> {
    pub centroids: Centroids<T>,
    /// Argmax of the final soft assignment.
    pub soft: ClusteringResult<T>,
    pub history: Vec<JointEpoch>,
    pub converged: bool,
    /// Labels of the k-means initialisation.
    pub init_labels: Vec<usize>,
}

fn changed_fraction(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len().max(1) as f64
}

/// Fine-tunes `model` in place. Centroids start from k-means on the current
/// codes; the target distribution is refreshed over the full dataset at the
/// start of every epoch. The encoder sees reconstruction and weighted
/// clustering gradients, the decoder reconstruction only, the centroids the
/// weighted clustering gradient through their own optimizer.
pub fn joint_train<T: Scalar>(model: &mut Dcae<T>, data: &Tensor<T>, k: usize, cfg: &JointConfig) -> Result<JointOutcome<T>> {
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr));
    joint_train_with(model, data, k, cfg, &mut opt)
}

/// [`joint_train`] continuing an existing network optimizer state (e.g. the
/// one left by pretraining) instead of a fresh one.
pub fn joint_train_with<T: Scalar>(
    model: &mut Dcae<T>,
    data: &Tensor<T>,
    k: usize,
    cfg: &JointConfig,
    net_opt: &mut Adam<T>,
) -> Result<JointOutcome<T>> {
    let n = data.rows();
    if k < 2 || n < k {
        return Err(invalid_param(format!("joint training needs 2 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if cfg.gamma < 0.0 || !(cfg.tol >= 0.0) || cfg.batch_size == 0 {
        return Err(invalid_param("joint training needs gamma ≥ 0, tol ≥ 0 and batch_size ≥ 1"));
    }
    let alpha = T::lit(cfg.alpha);
    let gamma = T::lit(cfg.gamma);
    let z = model.encode_all(data, ENCODE_CHUNK)?;
    let init = kmeans(&z, k, cfg.seed, &cfg.kmeans)?;
    let mut centroids = init.centroids;
    let mut previous = init.labels.clone();

    let mut rng = stream_rng(cfg.seed, STREAM_SHUFFLE);
    let mut centre_opt = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut converged = false;

    for epoch in 0..cfg.epochs {
        let z = model.encode_all(data, ENCODE_CHUNK)?;
        let q = soft_assign(&z, &centroids, alpha)?.q;
        let labels = argmax_rows(&q);
        let changed = changed_fraction(&labels, &previous);
        // The first refresh compares against the k-means labels, which the
        // soft argmax reproduces before any update.
        if epoch > 0 && changed < cfg.tol {
            debug!("joint training converged at epoch {epoch}");
            converged = true;
            break;
        }
        let p = target_distribution(&q)?;
        previous = labels;

        order.shuffle(&mut rng);
        let (mut rec_total, mut cl_total) = (T::zero(), T::zero());
        for idx in order.chunks(cfg.batch_size) {
            let m = T::of(idx.len());
            let batch = data.gather_rows(idx);
            model.zero_grad();
            let (zb, recon) = model.forward_train(&batch)?;
            let (rec, rec_grad) = mse_loss(&batch, &recon)?;
            let mut dz = model.decoder.backward(rec_grad)?;

            let qb = soft_assign(&zb, &centroids, alpha)?.q;
            let pb = p.gather_rows(idx);
            let cl = kl_divergence(&pb, &qb)? / m;
            let weight = gamma / m;
            let gz = clustering_grad_z(&zb, &centroids, &pb, &qb, alpha)?;
            for (d, &g) in dz.data_mut().iter_mut().zip(gz.data()) {
                *d += weight * g;
            }
            let gmu: Vec<T> = clustering_grad_mu(&zb, &centroids, &pb, &qb, alpha)?
                .data()
                .iter()
                .map(|&g| weight * g)
                .collect();
            model.encoder.backward(dz)?;
            net_opt.step(model.encoder.param_pairs().into_iter().chain(model.decoder.param_pairs()))?;
            centre_opt.step([(centroids.data_mut(), gmu.as_slice())])?;

            rec_total += rec * m;
            cl_total += cl * m;
        }
        let rec = (rec_total / T::of(n)).as_f64();
        let cl = (cl_total / T::of(n)).as_f64();
        let total = rec + cfg.gamma * cl;
        if !total.is_finite() || centroids.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: format!("non-finite loss (reconstruction {rec}, clustering {cl})"),
            });
        }
        debug!("joint epoch {epoch}: rec {rec:.6} cl {cl:.6} changed {changed:.4}");
        history.push(JointEpoch {
            epoch,
            reconstruction: rec,
            clustering: cl,
            total,
            changed_fraction: changed,
        });
    }
    model.encoder.clear_cache();
    model.decoder.clear_cache();

    let z = model.encode_all(data, ENCODE_CHUNK)?;
    let labels = argmax_rows(&soft_assign(&z, &centroids, alpha)?.q);
    let soft = ClusteringResult::new(labels, k, ClusterMode::SoftC1, centroids.clone(), cfg.seed, "joint_train")?;
    Ok(JointOutcome {
        centroids,
        soft,
        history,
        converged,
        init_labels: init.labels,
    })
}
