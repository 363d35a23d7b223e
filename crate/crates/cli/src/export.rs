//! Artifact writers. Floats use Rust's shortest round-trip formatting so
//! identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use tsidec::clustering::{Selection, JointEpoch};
use tsidec::evaluation::{Balance, NormalizedScores, RawScores, SweepReport};
use tsidec::pipeline::{PipelineConfig, SweepFailure};
use tsidec::{Centroids, Scalar};

use crate::error::{CliError, Result};
use crate::stats::ClusterStats;

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `series_id,label,mode`.
pub fn labels_csv(ids: &[String], labels: &[usize], mode: &str) -> String {
    let mut out = String::from("series_id,label,mode\n");
    for (id, l) in ids.iter().zip(labels) {
        let _ = writeln!(out, "{id},{l},{mode}");
    }
    out
}

/// `cluster,z0,…,z{d-1}`.
pub fn centers_latent_csv<T: Scalar>(c: &Centroids<T>) -> String {
    let mut out = String::from("cluster");
    for j in 0..c.dim() {
        let _ = write!(out, ",z{j}");
    }
    out.push('\n');
    for i in 0..c.k() {
        let _ = write!(out, "{i}");
        for v in c.row(i) {
            let _ = write!(out, ",{}", v.to_f64().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

/// `cluster,size,t0,…`: per-cluster mean of the resampled unit curves. Empty
/// clusters keep their row with blank values.
pub fn centers_timeseries_csv(curves: &[Vec<f64>], labels: &[usize], k: usize) -> String {
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::from("cluster,size");
    for t in 0..len {
        let _ = write!(out, ",t{t}");
    }
    out.push('\n');
    for c in 0..k {
        let members: Vec<&Vec<f64>> = curves.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
        let _ = write!(out, "{c},{}", members.len());
        for t in 0..len {
            if members.is_empty() {
                out.push(',');
            } else {
                let mean = members.iter().map(|m| m[t]).sum::<f64>() / members.len() as f64;
                let _ = write!(out, ",{mean}");
            }
        }
        out.push('\n');
    }
    out
}

/// `phase,epoch,reconstruction,clustering,total,changed_fraction`; pretraining
/// rows leave the clustering columns blank.
pub fn history_csv(pretrain: &[f64], joint: &[JointEpoch]) -> String {
    let mut out = String::from("phase,epoch,reconstruction,clustering,total,changed_fraction\n");
    for (e, l) in pretrain.iter().enumerate() {
        let _ = writeln!(out, "pretrain,{e},{l},,{l},");
    }
    for j in joint {
        let _ = writeln!(
            out,
            "joint,{},{},{},{},{}",
            j.epoch, j.reconstruction, j.clustering, j.total, j.changed_fraction
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct JointInfo {
    pub pretrain_epochs: usize,
    pub pretrain_final_loss: Option<f64>,
    pub joint_epochs: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepInfo {
    pub report: SweepReport,
    pub failures: Vec<SweepFailure>,
    /// Per seed, the k of its highest-scoring run.
    pub best_k_per_seed: Vec<(u64, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
}

/// Contents of `metrics.json`. `timestamp` is the only field allowed to
/// differ between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub timestamp: u64,
    pub config: PipelineConfig,
    pub n_series: usize,
    pub k: usize,
    pub seed: u64,
    pub mode: String,
    /// Scores of the selected labelling in the configured evaluation space.
    pub scores: RawScores,
    /// Soft and hard candidates normalized against each other.
    pub normalized: Vec<NormalizedScores>,
    pub eva: Option<f64>,
    pub cluster_sizes: Vec<usize>,
    pub balance: Balance,
    pub selection: Option<Selection>,
    pub joint: Option<JointInfo>,
    pub cluster_stats: Vec<ClusterStats>,
    pub sweep: Option<SweepInfo>,
    pub self_checks: Vec<SelfCheck>,
}

pub fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn metrics_json(m: &Metrics) -> Result<String> {
    let mut s = serde_json::to_string_pretty(m)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_layout() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert_eq!(labels_csv(&ids, &[1, 0], "soft_c1"), "series_id,label,mode\na,1,soft_c1\nb,0,soft_c1\n");
    }

    #[test]
    fn timeseries_centers_keep_empty_rows() {
        let curves = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(
            centers_timeseries_csv(&curves, &[0, 0], 2),
            "cluster,size,t0,t1\n0,2,0.5,0.5\n1,0,,\n"
        );
    }

    #[test]
    fn latent_centers() {
        let c = Centroids::<f64>::new(2, 2, vec![0.5, 1.0, -2.0, 0.0]).unwrap();
        assert_eq!(centers_latent_csv(&c), "cluster,z0,z1\n0,0.5,1\n1,-2,0\n");
    }

    #[test]
    fn history_rows() {
        let j = JointEpoch {
            epoch: 0,
            reconstruction: 1.5,
            clustering: 0.25,
            total: 1.625,
            changed_fraction: 0.0,
        };
        assert_eq!(
            history_csv(&[2.0], &[j]),
            "phase,epoch,reconstruction,clustering,total,changed_fraction\npretrain,0,2,,2,\njoint,0,1.5,0.25,1.625,0\n"
        );
    }
}
