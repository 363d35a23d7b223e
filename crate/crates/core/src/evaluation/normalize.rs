//! Pool-relative normalization of raw validity scores and the composite score.

use serde::{Deserialize, Serialize};

use super::metrics::{calinski_harabasz, davies_bouldin, silhouette};
use crate::error::Result;
use crate::nn::Tensor;
use crate::Scalar;

/// IQR fence multiplier.
pub const IQR_FENCE: f64 = 1.5;
/// Pools smaller than this skip outlier filtering.
pub const IQR_MIN_POOL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Silhouette,
    CalinskiHarabasz,
    DaviesBouldin,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Silhouette, MetricKind::CalinskiHarabasz, MetricKind::DaviesBouldin];

    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricKind::DaviesBouldin)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MetricKind::Silhouette => "sil",
            MetricKind::CalinskiHarabasz => "ch",
            MetricKind::DaviesBouldin => "db",
        }
    }

    /// Maps raw values so that larger is always better.
    fn oriented(self, v: f64) -> f64 {
        if self.higher_is_better() {
            v
        } else {
            -v
        }
    }
}

/// Raw validity indices of one candidate labelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub candidate_id: String,
    pub sil: f64,
    pub ch: f64,
    pub db: f64,
}

impl RawScores {
    pub fn compute<T: Scalar>(id: impl Into<String>, x: &Tensor<T>, labels: &[usize]) -> Result<Self> {
        Ok(Self {
            candidate_id: id.into(),
            sil: silhouette(x, labels)?,
            ch: calinski_harabasz(x, labels)?,
            db: davies_bouldin(x, labels)?,
        })
    }

    /// Placeholder for a labelling whose indices are undefined; it scores 0
    /// in any pool.
    pub fn degenerate(id: impl Into<String>) -> Self {
        Self {
            candidate_id: id.into(),
            sil: -1.0,
            ch: f64::INFINITY,
            db: f64::INFINITY,
        }
    }

    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Silhouette => self.sil,
            MetricKind::CalinskiHarabasz => self.ch,
            MetricKind::DaviesBouldin => self.db,
        }
    }

    /// True when some index is infinite (zero dispersion or coincident centroids).
    pub fn is_degenerate(&self) -> bool {
        MetricKind::ALL.iter().any(|&m| !self.get(m).is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqrFilter {
    pub kept: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

/// Quantile by linear interpolation at position `(n−1)·q` of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Drops values outside the Tukey fences. Pools smaller than
/// [`IQR_MIN_POOL`] are returned whole with infinite bounds.
pub fn iqr_filter(values: &[f64]) -> IqrFilter {
    if values.len() < IQR_MIN_POOL {
        return IqrFilter {
            kept: values.to_vec(),
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
    let iqr = q3 - q1;
    let (lower, upper) = (q1 - IQR_FENCE * iqr, q3 + IQR_FENCE * iqr);
    IqrFilter {
        kept: values.iter().copied().filter(|v| (lower..=upper).contains(v)).collect(),
        lower,
        upper,
    }
}

/// Min–max scores over the IQR-filtered finite values, oriented so 1 is best
/// and clamped to `[0, 1]`. Non-finite entries score 0. A zero range gives
/// 0.5, unless non-finite entries are present: the finite ones then beat
/// every other entry and score 1.
pub fn minmax_norm(values: &[f64], kind: MetricKind) -> Vec<f64> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let flat = if finite.len() < values.len() { 1.0 } else { 0.5 };
    let kept = iqr_filter(&finite).kept;
    let (lo, hi) = kept
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                0.0
            } else if hi <= lo {
                flat
            } else {
                let s = (v - lo) / (hi - lo);
                let s = if kind.higher_is_better() { s } else { 1.0 - s };
                s.clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// `(rank − 1)/(N − 1)` with ranks ascending in quality and ties averaged.
/// Non-finite entries rank below every finite one and score 0; `N = 1` scores 1.
pub fn rank_norm(values: &[f64], kind: MetricKind) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![if values[0].is_finite() { 1.0 } else { 0.0 }];
    }
    let key: Vec<f64> = values
        .iter()
        .map(|&v| if v.is_finite() { kind.oriented(v) } else { f64::NEG_INFINITY })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && key[order[end]] == key[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
        .iter()
        .zip(values)
        .map(|(&r, v)| if v.is_finite() { (r - 1.0) / (n - 1) as f64 } else { 0.0 })
        .collect()
}

/// Normalized components and composite score of one pool entry. Arrays are
/// indexed in [`MetricKind::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScores {
    pub candidate_id: String,
    pub minmax: [f64; 3],
    pub rank: [f64; 3],
    pub norm: [f64; 3],
    pub eva: f64,
}

/// Candidates whose scores are normalized against one another.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub entries: Vec<RawScores>,
}

impl CandidatePool {
    pub fn new(entries: Vec<RawScores>) -> Self {
        Self { entries }
    }

    /// Per-entry normalized scores; `eva` averages the three per-metric means
    /// of the min–max and rank components.
    pub fn composite(&self) -> Vec<NormalizedScores> {
        let mut out: Vec<NormalizedScores> = self
            .entries
            .iter()
            .map(|e| NormalizedScores {
                candidate_id: e.candidate_id.clone(),
                minmax: [0.0; 3],
                rank: [0.0; 3],
                norm: [0.0; 3],
                eva: 0.0,
            })
            .collect();
        if out.is_empty() {
            return out;
        }
        for (m, kind) in MetricKind::ALL.into_iter().enumerate() {
            let values: Vec<f64> = self.entries.iter().map(|e| e.get(kind)).collect();
            let mm = minmax_norm(&values, kind);
            let rk = rank_norm(&values, kind);
            for (o, (a, b)) in out.iter_mut().zip(mm.into_iter().zip(rk)) {
                o.minmax[m] = a;
                o.rank[m] = b;
                o.norm[m] = (a + b) / 2.0;
            }
        }
        for o in &mut out {
            o.eva = o.norm.iter().sum::<f64>() / 3.0;
        }
        out
    }
}

/// Composite score of each entry.
pub fn composite_score(pool: &CandidatePool) -> Vec<f64> {
    pool.composite().into_iter().map(|s| s.eva).collect()
}
