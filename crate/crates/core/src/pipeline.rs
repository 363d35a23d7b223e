//! End-to-end orchestration: preprocessing, pretraining, joint training,
//! soft/hard selection and the k sweep.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::clustering::{
    hard_cluster, joint_train_with, select_best, ClusteringResult, JointConfig, JointEpoch, KMeansOptions, SelectionConfig,
};
use crate::dcae::{pretrain_with, Dcae, DcaeArch, PretrainConfig};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::evaluation::{RawScores, SweepReport, SweepRun};
use crate::nn::{Adam, AdamConfig, Tensor};
use crate::windowing::{normalize_unit, resample_linear, window_transform, SeriesMatrix, TimeSeries};
use crate::Scalar;

/// Feature space used to score candidate labellings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSpace {
    /// Flattened input matrices.
    Input,
    /// Latent codes of the trained encoder.
    Latent,
}

/// A single cluster count or an inclusive range to sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Single(usize),
    Range(usize, usize),
}

impl KChoice {
    pub fn values(self) -> Vec<usize> {
        match self {
            KChoice::Single(k) => vec![k],
            KChoice::Range(lo, hi) => (lo..=hi).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub resample_len: usize,
    pub window_size: usize,
    pub stride: usize,
    pub latent_dim: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub epochs: usize,
    pub k: KChoice,
    /// Seeds per k: `seed, seed + 1, …`.
    pub reps: usize,
    pub seed: u64,
    pub eval_space: EvalSpace,
    pub min_cluster_frac: f64,
    /// Early-stop threshold on the fraction of changed labels.
    pub tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            resample_len: 497,
            window_size: 32,
            stride: 15,
            latent_dim: 128,
            alpha: 1.0,
            gamma: 0.5,
            lr: 1e-3,
            batch_size: 32,
            pretrain_epochs: 200,
            epochs: 1000,
            k: KChoice::Single(4),
            reps: 1,
            seed: 0,
            eval_space: EvalSpace::Input,
            min_cluster_frac: 0.01,
            tol: 1e-3,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("resample_len", self.resample_len),
            ("window_size", self.window_size),
            ("stride", self.stride),
            ("latent_dim", self.latent_dim),
            ("batch_size", self.batch_size),
            ("reps", self.reps),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(invalid_param(format!("{name} must be at least 1")));
        }
        if self.resample_len < 2 {
            return Err(invalid_param("resample_len must be at least 2"));
        }
        if !(self.min_cluster_frac > 0.0 && self.min_cluster_frac < 1.0) || !(self.tol >= 0.0 && self.tol < 1.0) {
            return Err(invalid_param("min_cluster_frac must be in (0, 1) and tol in [0, 1)"));
        }
        if !(self.alpha > 0.0) || !(self.gamma >= 0.0) || !(self.lr > 0.0) {
            return Err(invalid_param("alpha and lr must be positive, gamma non-negative"));
        }
        match self.k {
            KChoice::Single(k) if k < 2 => Err(invalid_param("k must be at least 2")),
            KChoice::Range(lo, hi) if lo < 2 || hi < lo => Err(invalid_param(format!("invalid k range {lo}..={hi}"))),
            _ => Ok(()),
        }
    }

    pub fn arch(&self) -> DcaeArch {
        DcaeArch::with_latent(self.latent_dim)
    }

    pub fn pretrain_config(&self, seed: u64) -> PretrainConfig {
        PretrainConfig {
            epochs: self.pretrain_epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            seed,
        }
    }

    pub fn joint_config(&self, seed: u64) -> JointConfig {
        JointConfig {
            gamma: self.gamma,
            alpha: self.alpha,
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            tol: self.tol,
            seed,
            kmeans: KMeansOptions::default(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.reps as u64).map(|r| self.seed + r).collect()
    }
}

/// Preprocessed dataset.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub ids: Vec<String>,
    /// Resampled, unit-scaled curves.
    pub curves: Vec<Vec<f64>>,
    pub matrices: Vec<SeriesMatrix>,
    /// `n×1×rows×cols` network input.
    pub input: Tensor<T>,
}

impl<T: Scalar> Prepared<T> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn matrix_shape(&self) -> (usize, usize) {
        (self.input.shape()[2], self.input.shape()[3])
    }

    /// Inputs flattened to `n×(rows·cols)`.
    pub fn flat_input(&self) -> Tensor<T> {
        let n = self.len();
        let d = self.input.len() / n.max(1);
        Tensor::from_vec(vec![n, d], self.input.data().to_vec()).expect("same element count")
    }
}

pub fn prepare<T: Scalar>(dataset: &[TimeSeries], cfg: &PipelineConfig) -> Result<Prepared<T>> {
    if dataset.is_empty() {
        return Err(invalid_input("dataset is empty"));
    }
    let mut ids = Vec::with_capacity(dataset.len());
    let mut curves = Vec::with_capacity(dataset.len());
    let mut matrices = Vec::with_capacity(dataset.len());
    for s in dataset {
        let unit = normalize_unit(&resample_linear(s, cfg.resample_len)?)?;
        matrices.push(window_transform(&unit, cfg.window_size, cfg.stride)?);
        ids.push(s.id.clone());
        curves.push(unit.values);
    }
    let input = crate::windowing::stack_matrices(&matrices)?;
    Ok(Prepared {
        ids,
        curves,
        matrices,
        input,
    })
}

/// Everything produced by one (k, seed) run.
#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub k: usize,
    pub seed: u64,
    pub model: Dcae<T>,
    pub soft: ClusteringResult<T>,
    pub hard: ClusteringResult<T>,
    pub best: ClusteringResult<T>,
    /// Raw scores of `best` in the configured evaluation space.
    pub scores: RawScores,
    pub pretrain_history: Vec<f64>,
    pub joint_history: Vec<JointEpoch>,
    pub converged: bool,
    /// Final latent codes.
    pub latent: Tensor<T>,
}

/// A pretrained autoencoder with the optimizer state joint training resumes from.
#[derive(Debug, Clone)]
pub struct Pretrained<T> {
    pub model: Dcae<T>,
    pub optimizer: Adam<T>,
    pub history: Vec<f64>,
}

/// Builds and pretrains the autoencoder for one seed.
pub fn pretrained_model<T: Scalar>(data: &Prepared<T>, cfg: &PipelineConfig, seed: u64) -> Result<Pretrained<T>> {
    let (rows, cols) = data.matrix_shape();
    let mut model = Dcae::build(rows, cols, cfg.arch(), seed)?;
    let mut optimizer = Adam::new(AdamConfig::with_lr(cfg.lr));
    let history = pretrain_with(&mut model, &data.input, &cfg.pretrain_config(seed), &mut optimizer)?;
    Ok(Pretrained {
        model,
        optimizer,
        history: history.into_iter().map(|v| v.as_f64()).collect(),
    })
}

/// Joint training, hard clustering and selection on a pretrained model.
/// Joint training continues the pretraining optimizer state: a fresh Adam
/// takes full learning-rate steps on every weight at once, which knocks the
/// converged autoencoder far off its reconstruction optimum.
pub fn finish_run<T: Scalar>(pre: Pretrained<T>, data: &Prepared<T>, cfg: &PipelineConfig, k: usize, seed: u64) -> Result<RunOutcome<T>> {
    let Pretrained {
        mut model,
        mut optimizer,
        history: pretrain_history,
    } = pre;
    let joint = joint_train_with(&mut model, &data.input, k, &cfg.joint_config(seed), &mut optimizer)?;
    let latent = model.encode_all(&data.input, 256)?;
    let hard = hard_cluster(&latent, k, seed, &KMeansOptions::default())?;
    let features = match cfg.eval_space {
        EvalSpace::Input => data.flat_input(),
        EvalSpace::Latent => latent.clone(),
    };
    let selection = SelectionConfig {
        min_cluster_frac: cfg.min_cluster_frac,
    };
    let best = select_best(&joint.soft, &hard, &features, &selection)?;
    let scores = RawScores::compute(format!("k{k}-seed{seed}"), &features, &best.labels).unwrap_or_else(|e| {
        warn!("k = {k}, seed = {seed}: scores undefined ({e}); treating as degenerate");
        RawScores::degenerate(format!("k{k}-seed{seed}"))
    });
    Ok(RunOutcome {
        k,
        seed,
        model,
        soft: joint.soft,
        hard,
        best,
        scores,
        pretrain_history,
        joint_history: joint.history,
        converged: joint.converged,
        latent,
    })
}

pub fn run_single<T: Scalar>(data: &Prepared<T>, cfg: &PipelineConfig, k: usize, seed: u64) -> Result<RunOutcome<T>> {
    finish_run(pretrained_model(data, cfg, seed)?, data, cfg, k, seed)
}

/// Labels of one sweep run (the model itself is not kept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub k: usize,
    pub seed: u64,
    pub best_labels: Vec<usize>,
    pub soft_labels: Vec<usize>,
    pub hard_labels: Vec<usize>,
    pub joint_epochs: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub k: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub report: SweepReport,
    /// Aligned with `report.runs`.
    pub summaries: Vec<RunSummary>,
    pub failures: Vec<SweepFailure>,
}

/// Runs every (k, seed) pair, pooling all scores for normalization. One
/// pretrained model per seed is shared by all k, which is equivalent to
/// pretraining per run since pretraining does not depend on k. Failed runs
/// are recorded; the sweep fails only if every run does.
pub fn sweep_k<T: Scalar>(data: &Prepared<T>, cfg: &PipelineConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let ks = cfg.k.values();
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    let mut last_error = None;
    for seed in cfg.seeds() {
        let pre = match pretrained_model(data, cfg, seed) {
            Ok(v) => v,
            Err(e) => {
                warn!("seed {seed}: pretraining failed: {e}");
                failures.extend(ks.iter().map(|&k| SweepFailure {
                    k,
                    seed,
                    error: e.to_string(),
                }));
                last_error = Some(e);
                continue;
            }
        };
        for &k in &ks {
            match finish_run(pre.clone(), data, cfg, k, seed) {
                Ok(out) => {
                    info!("sweep k = {k}, seed = {seed}: {:?}", out.scores);
                    runs.push(SweepRun {
                        k,
                        seed,
                        scores: out.scores,
                    });
                    summaries.push(RunSummary {
                        k,
                        seed,
                        best_labels: out.best.labels,
                        soft_labels: out.soft.labels,
                        hard_labels: out.hard.labels,
                        joint_epochs: out.joint_history.len(),
                        converged: out.converged,
                    });
                }
                Err(e) => {
                    warn!("sweep k = {k}, seed = {seed} failed: {e}");
                    failures.push(SweepFailure {
                        k,
                        seed,
                        error: e.to_string(),
                    });
                    last_error = Some(e);
                }
            }
        }
    }
    match SweepReport::from_runs(runs) {
        Some(report) => Ok(SweepOutcome {
            report,
            summaries,
            failures,
        }),
        None => Err(last_error.unwrap_or_else(|| Error::InvalidInput("sweep produced no runs".into()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let cfg = PipelineConfig::default();
        assert_eq!((cfg.resample_len, cfg.window_size, cfg.stride, cfg.latent_dim), (497, 32, 15, 128));
        assert_eq!((cfg.batch_size, cfg.pretrain_epochs, cfg.epochs), (32, 200, 1000));
        assert!(cfg.validate().is_ok());
        assert!(PipelineConfig { k: KChoice::Single(1), ..cfg.clone() }.validate().is_err());
        assert!(PipelineConfig { k: KChoice::Range(5, 3), ..cfg.clone() }.validate().is_err());
        assert!(PipelineConfig { stride: 0, ..cfg }.validate().is_err());
        assert_eq!(KChoice::Range(3, 5).values(), vec![3, 4, 5]);
    }

    #[test]
    fn prepare_shapes() {
        let ts = TimeSeries::new("a", (0..300).map(|i| (i as f64).sin()).collect()).unwrap();
        let p: Prepared<f64> = prepare(&[ts.clone(), ts], &PipelineConfig::default()).unwrap();
        assert_eq!(p.input.shape(), &[2, 1, 32, 32]);
        assert_eq!(p.flat_input().shape(), &[2, 1024]);
        assert_eq!(p.curves[0].len(), 497);
        assert!(prepare::<f64>(&[], &PipelineConfig::default()).is_err());
    }
}
