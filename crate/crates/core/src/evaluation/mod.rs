//! Label-free quality scores, their pool-relative normalization, and
//! diagnostics for comparing clusterings.

mod agreement;
mod metrics;
mod normalize;
mod report;

pub use agreement::{adjusted_rand_index, balance_diagnostics, balance_from_sizes, Balance, SMALL_CLUSTER_FRAC};
pub use metrics::{calinski_harabasz, davies_bouldin, silhouette};
pub use normalize::{
    composite_score, iqr_filter, minmax_norm, quantile, rank_norm, CandidatePool, IqrFilter, MetricKind,
    NormalizedScores, RawScores, IQR_FENCE, IQR_MIN_POOL,
};
pub use report::{MeanSe, SweepReport, SweepRow, SweepRun};
