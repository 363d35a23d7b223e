//! Per-k summaries of a sweep whose runs share one normalization pool.

use serde::{Deserialize, Serialize};

use super::normalize::{CandidatePool, NormalizedScores, RawScores};

/// One completed (k, seed) run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub k: usize,
    pub seed: u64,
    pub scores: RawScores,
}

/// Mean and standard error of one quantity over the runs of a k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    /// Sample standard deviation over `√n`; a single value has zero error.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, se }
    }
}

impl std::fmt::Display for MeanSe {
    /// Four decimals for the mean, five for a non-zero standard error.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.se == 0.0 {
            write!(f, "{:.4} ± 0.0", self.mean)
        } else {
            write!(f, "{:.4} ± {:.5}", self.mean, self.se)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub runs: usize,
    /// Silhouette, Calinski–Harabasz and Davies–Bouldin normalized scores.
    pub norm: [MeanSe; 3],
    pub eva: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    /// Pool scores, aligned with `runs`.
    pub scores: Vec<NormalizedScores>,
    pub rows: Vec<SweepRow>,
    /// Index into `runs` of the highest composite score (earliest on ties).
    pub best: usize,
}

impl SweepReport {
    /// Pools every run, then groups by k in ascending order.
    pub fn from_runs(runs: Vec<SweepRun>) -> Option<Self> {
        if runs.is_empty() {
            return None;
        }
        let pool = CandidatePool::new(runs.iter().map(|r| r.scores.clone()).collect());
        let scores = pool.composite();
        let mut ks: Vec<usize> = runs.iter().map(|r| r.k).collect();
        ks.sort_unstable();
        ks.dedup();
        let rows = ks
            .into_iter()
            .map(|k| {
                let members: Vec<&NormalizedScores> =
                    runs.iter().zip(&scores).filter(|(r, _)| r.k == k).map(|(_, s)| s).collect();
                let col = |f: &dyn Fn(&NormalizedScores) -> f64| MeanSe::of(&members.iter().map(|s| f(s)).collect::<Vec<_>>());
                SweepRow {
                    k,
                    runs: members.len(),
                    norm: [col(&|s| s.norm[0]), col(&|s| s.norm[1]), col(&|s| s.norm[2])],
                    eva: col(&|s| s.eva),
                }
            })
            .collect();
        let best = scores
            .iter()
            .enumerate()
            .fold(0, |b, (i, s)| if s.eva > scores[b].eva { i } else { b });
        Some(Self { runs, scores, rows, best })
    }

    pub fn best_run(&self) -> &SweepRun {
        &self.runs[self.best]
    }

    /// Best-scoring k among the runs that used `seed`.
    pub fn best_k_for_seed(&self, seed: u64) -> Option<usize> {
        self.runs
            .iter()
            .zip(&self.scores)
            .filter(|(r, _)| r.seed == seed)
            .fold(None, |best: Option<(usize, f64)>, (r, s)| match best {
                Some((_, e)) if e >= s.eva => best,
                _ => Some((r.k, s.eva)),
            })
            .map(|(k, _)| k)
    }

    /// `k,runs,s_norm_sil,s_norm_ch,s_norm_db,s_eva` with `mean ± se` cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,runs,s_norm_sil,s_norm_ch,s_norm_db,s_eva\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.k, r.runs, r.norm[0], r.norm[1], r.norm[2], r.eva));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(MeanSe { mean: 0.75234, se: 0.007243 }.to_string(), "0.7523 ± 0.00724");
        assert_eq!(MeanSe::of(&[0.5]).to_string(), "0.5000 ± 0.0");
        let m = MeanSe::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    fn run(k: usize, seed: u64, sil: f64) -> SweepRun {
        SweepRun {
            k,
            seed,
            scores: RawScores {
                candidate_id: format!("k{k}s{seed}"),
                sil,
                ch: sil * 100.0,
                db: 1.0 - sil,
            },
        }
    }

    #[test]
    fn grouping_and_best() {
        let report = SweepReport::from_runs(vec![run(3, 0, 0.2), run(4, 0, 0.9), run(3, 1, 0.95), run(4, 1, 0.3)]).unwrap();
        assert_eq!(report.rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(report.best_run().k, 3);
        assert_eq!(report.best_k_for_seed(0), Some(4));
        assert_eq!(report.best_k_for_seed(1), Some(3));
        assert!(report.to_csv().starts_with("k,runs,"));
        assert!(SweepReport::from_runs(Vec::new()).is_none());
    }

    #[test]
    fn single_k() {
        let report = SweepReport::from_runs(vec![run(5, 0, 0.4)]).unwrap();
        assert_eq!(report.best_run().k, 5);
        // A one-entry pool has zero range (0.5) and top rank (1).
        assert_eq!(report.rows[0].eva.mean, 0.75);
    }
}
