//! Two-stage choice between the soft and hard labellings.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{cluster_sizes, ClusterMode, ClusteringResult, Selection, SelectionStage};
use crate::error::{invalid_param, Result};
use crate::evaluation::{CandidatePool, RawScores};
use crate::nn::Tensor;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SingleCluster,
    SmallCluster { label: usize, size: usize },
    EmptyCluster { label: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SingleCluster => write!(f, "single cluster"),
            Violation::SmallCluster { label, size } => write!(f, "small cluster {label} ({size} samples)"),
            Violation::EmptyCluster { label } => write!(f, "empty cluster {label}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Clusters holding less than this fraction of samples are flagged.
    pub min_cluster_frac: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { min_cluster_frac: 0.01 }
    }
}

/// Structural problems of a labelling; empty means it passes.
pub fn qualitative_check<T: Scalar>(result: &ClusteringResult<T>, min_frac: f64) -> Vec<Violation> {
    let sizes = cluster_sizes(&result.labels, result.k);
    let n = result.labels.len() as f64;
    let mut out = Vec::new();
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        out.push(Violation::SingleCluster);
    }
    for (label, &size) in sizes.iter().enumerate() {
        if size == 0 {
            out.push(Violation::EmptyCluster { label });
        } else if (size as f64) < min_frac * n {
            out.push(Violation::SmallCluster { label, size });
        }
    }
    out
}

/// Picks between the soft (`c1`) and hard (`c2`) labellings. A labelling that
/// alone passes the qualitative check wins outright; otherwise the composite
/// score over the two-candidate pool decides, with ties going to the hard
/// output.
pub fn select_best<T: Scalar>(
    c1: &ClusteringResult<T>,
    c2: &ClusteringResult<T>,
    features: &Tensor<T>,
    cfg: &SelectionConfig,
) -> Result<ClusteringResult<T>> {
    if c1.labels.len() != c2.labels.len() || features.rows() != c1.labels.len() {
        return Err(invalid_param(format!(
            "candidates cover {} and {} samples, features {}",
            c1.labels.len(),
            c2.labels.len(),
            features.rows()
        )));
    }
    let v1 = qualitative_check(c1, cfg.min_cluster_frac);
    let v2 = qualitative_check(c2, cfg.min_cluster_frac);
    let mut selection = Selection {
        chosen: ClusterMode::HardC2,
        stage: SelectionStage::Qualitative,
        degenerate: false,
        soft_violations: v1.clone(),
        hard_violations: v2.clone(),
        soft_scores: None,
        hard_scores: None,
        soft_eva: None,
        hard_eva: None,
    };
    match (v1.is_empty(), v2.is_empty()) {
        (true, false) => selection.chosen = ClusterMode::SoftC1,
        (false, true) => {}
        (false, false) => {
            selection.degenerate = true;
            if v1.len() < v2.len() {
                selection.chosen = ClusterMode::SoftC1;
            }
        }
        (true, true) => {
            let s1 = RawScores::compute("soft_c1", features, &c1.labels)?;
            let s2 = RawScores::compute("hard_c2", features, &c2.labels)?;
            let scored = CandidatePool::new(vec![s1.clone(), s2.clone()]).composite();
            let (e1, e2) = (scored[0].eva, scored[1].eva);
            selection.stage = SelectionStage::Quantitative;
            if e1 > e2 {
                selection.chosen = ClusterMode::SoftC1;
            }
            selection.soft_scores = Some(s1);
            selection.hard_scores = Some(s2);
            selection.soft_eva = Some(e1);
            selection.hard_eva = Some(e2);
        }
    }
    let winner = if selection.chosen == ClusterMode::SoftC1 { c1 } else { c2 };
    let mut best = winner.clone();
    best.mode = ClusterMode::Selected;
    best.provenance.selection = Some(selection);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Centroids;

    fn result(labels: Vec<usize>, k: usize, mode: ClusterMode) -> ClusteringResult<f64> {
        let c = Centroids::new(k, 1, (0..k).map(|j| j as f64).collect()).unwrap();
        ClusteringResult::new(labels, k, mode, c, 0, "test").unwrap()
    }

    #[test]
    fn violations() {
        let single = result(vec![0; 10], 2, ClusterMode::SoftC1);
        let v = qualitative_check(&single, 0.01);
        assert_eq!(v, vec![Violation::SingleCluster, Violation::EmptyCluster { label: 1 }]);
        assert_eq!(v[0].to_string(), "single cluster");
        let quarters = result((0..100).map(|i| i % 4).collect(), 4, ClusterMode::SoftC1);
        assert!(qualitative_check(&quarters, 0.01).is_empty());
        let labels = (0..1000).map(|i| usize::from(i >= 5)).collect();
        let small = result(labels, 2, ClusterMode::SoftC1);
        assert_eq!(qualitative_check(&small, 0.01), vec![Violation::SmallCluster { label: 0, size: 5 }]);
    }

    fn features() -> Tensor<f64> {
        Tensor::matrix(6, 1, &[0.0, 0.1, 0.2, 5.0, 5.1, 9.0]).unwrap()
    }

    #[test]
    fn stage_one_rejects_single_cluster() {
        let c1 = result(vec![0; 6], 2, ClusterMode::SoftC1);
        let c2 = result(vec![0, 0, 0, 1, 1, 1], 2, ClusterMode::HardC2);
        let best = select_best(&c1, &c2, &features(), &SelectionConfig::default()).unwrap();
        let sel = best.provenance.selection.unwrap();
        assert_eq!((sel.chosen, sel.stage), (ClusterMode::HardC2, SelectionStage::Qualitative));
        assert_eq!(best.mode, ClusterMode::Selected);
        assert_eq!(best.labels, c2.labels);
    }

    #[test]
    fn identical_candidates_tie_to_hard() {
        let c1 = result(vec![0, 0, 0, 1, 1, 1], 2, ClusterMode::SoftC1);
        let c2 = result(vec![0, 0, 0, 1, 1, 1], 2, ClusterMode::HardC2);
        let sel = select_best(&c1, &c2, &features(), &SelectionConfig::default())
            .unwrap()
            .provenance
            .selection
            .unwrap();
        assert_eq!(sel.stage, SelectionStage::Quantitative);
        assert_eq!(sel.chosen, ClusterMode::HardC2);
        assert_eq!(sel.soft_eva, sel.hard_eva);
    }

    #[test]
    fn better_partition_wins_stage_two() {
        let c1 = result(vec![0, 0, 0, 1, 1, 1], 2, ClusterMode::SoftC1);
        let c2 = result(vec![0, 0, 1, 1, 1, 1], 2, ClusterMode::HardC2);
        let sel = select_best(&c1, &c2, &features(), &SelectionConfig::default())
            .unwrap()
            .provenance
            .selection
            .unwrap();
        assert_eq!(sel.chosen, ClusterMode::SoftC1);
        assert_eq!(sel.soft_eva, Some(1.0));
        assert_eq!(sel.hard_eva, Some(0.0));
    }

    #[test]
    fn both_failing_is_flagged() {
        let c1 = result(vec![0; 6], 3, ClusterMode::SoftC1);
        let c2 = result(vec![0, 0, 0, 0, 0, 1], 3, ClusterMode::HardC2);
        let sel = select_best(&c1, &c2, &features(), &SelectionConfig::default())
            .unwrap()
            .provenance
            .selection
            .unwrap();
        assert!(sel.degenerate);
        assert_eq!(sel.chosen, ClusterMode::HardC2);
    }
}
