//! Subcommands: `generate`, `run` and `baseline`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use tsidec::baselines::kmedoids_dtw;
use tsidec::datagen::{default_palette, gen_dataset};
use tsidec::evaluation::{balance_diagnostics, CandidatePool, RawScores};
use tsidec::pipeline::{prepare, run_single, sweep_k, KChoice, PipelineConfig, Prepared};
use tsidec::TimeSeries;

use crate::config::{apply, load_config};
use crate::error::{CliError, Result};
use crate::export::{
    centers_latent_csv, centers_timeseries_csv, history_csv, labels_csv, metrics_json, unix_time, write_text,
    JointInfo, Metrics, SelfCheck, SweepInfo,
};
use crate::ingest::{ingest_csv, ingest_metadata, write_long_csv, write_metadata_csv};
use crate::model_io::{model_bytes, model_from_bytes};
use crate::plot::{centers_svg, pca_2d, scatter_svg};
use crate::stats::{cluster_stats, stats_csv};

#[derive(Debug, Parser)]
#[command(name = "tsidec", version, about = "Deep convolutional clustering of time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-mode dataset with ground-truth labels.
    Generate(GenerateArgs),
    /// Train, cluster and export the full artifact bundle.
    Run(RunArgs),
    /// k-medoids under DTW on the resampled curves.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_per_mode: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-format CSV `series_id,timestamp,value`.
    #[arg(long)]
    pub input: PathBuf,
    /// Optional sidecar `series_id,<column>,…`.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Inclusive range such as `3..8`; enables the sweep.
    #[arg(long)]
    pub k_range: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 497)]
    pub resample_len: usize,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Run(a) => run(&a),
        Command::Baseline(a) => baseline(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    create_dir(&a.out)?;
    let palette = default_palette();
    let (data, labels) = gen_dataset(&palette, a.n_per_mode, a.seed)?;
    write_long_csv(&data, &a.out.join("series.csv"))?;
    write_metadata_csv(&data, &a.out.join("metadata.csv"))?;
    let mut truth = String::from("series_id,label,mode\n");
    for (s, &l) in data.iter().zip(&labels) {
        truth.push_str(&format!("{},{l},{}\n", s.id, palette[l].name));
    }
    write_text(&a.out.join("truth.csv"), &truth)?;
    info!("wrote {} series to {}", data.len(), a.out.display());
    Ok(())
}

fn load_dataset(d: &DataArgs) -> Result<Vec<TimeSeries>> {
    let mut data = ingest_csv(&d.input)?;
    if let Some(meta) = &d.metadata {
        ingest_metadata(meta, &mut data)?;
    }
    Ok(data)
}

/// Config file, then explicit flags, then `--set` pairs.
pub fn effective_config(a: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => PipelineConfig::default(),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut flag = |key: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((key.to_string(), v));
        }
    };
    flag("k", a.k.map(|v| v.to_string()));
    flag("k_range", a.k_range.clone());
    flag("seed", a.seed.map(|v| v.to_string()));
    flag("reps", a.reps.map(|v| v.to_string()));
    flag("pretrain_epochs", a.pretrain_epochs.map(|v| v.to_string()));
    flag("epochs", a.epochs.map(|v| v.to_string()));
    for s in &a.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
        pairs.push((k.to_string(), v.to_string()));
    }
    for (k, v) in pairs {
        apply(&mut cfg, &k, &v).map_err(CliError::Config)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(a: &RunArgs) -> Result<()> {
    let cfg = effective_config(a)?;
    let dataset = load_dataset(&a.data)?;
    let data: Prepared<f64> = prepare(&dataset, &cfg)?;
    let out = &a.data.out;
    create_dir(out)?;

    // A sweep keeps only scores and labels; the winning (k, seed) is rerun to
    // recover its model, which is deterministic.
    let sweep = if matches!(cfg.k, KChoice::Range(..)) || cfg.reps > 1 {
        let s = sweep_k(&data, &cfg)?;
        write_text(&out.join("sweep_report.csv"), &s.report.to_csv())?;
        Some(s)
    } else {
        None
    };
    let (k, seed) = match &sweep {
        Some(s) => {
            let best = s.report.best_run();
            (best.k, best.seed)
        }
        None => (cfg.k.values()[0], cfg.seed),
    };
    info!("final run: k = {k}, seed = {seed}");
    let outcome = run_single(&data, &cfg, k, seed)?;
    let best = &outcome.best;
    // Labels are tagged with the route that produced them, not "selected".
    let mode = best
        .provenance
        .selection
        .as_ref()
        .map_or(best.mode, |s| s.chosen)
        .as_str();

    let bytes = model_bytes(&outcome.model, &outcome.soft.centroids)?;
    let model_path = out.join("model.bin");
    std::fs::write(&model_path, &bytes).map_err(|e| CliError::io(&model_path, e))?;

    write_text(&out.join("labels.csv"), &labels_csv(&data.ids, &best.labels, mode))?;
    write_text(&out.join("centers_latent.csv"), &centers_latent_csv(&best.centroids))?;
    write_text(
        &out.join("centers_timeseries.csv"),
        &centers_timeseries_csv(&data.curves, &best.labels, k),
    )?;
    write_text(&out.join("history.csv"), &history_csv(&outcome.pretrain_history, &outcome.joint_history))?;
    let stats = cluster_stats(&dataset, &best.labels, k);
    write_text(&out.join("cluster_stats.csv"), &stats_csv(&stats))?;
    write_text(&out.join("centers.svg"), &centers_svg(&data.curves, &best.labels, k))?;
    let codes: Vec<Vec<f64>> = (0..outcome.latent.rows()).map(|i| outcome.latent.row(i).to_vec()).collect();
    write_text(&out.join("latent_pca.svg"), &scatter_svg(&pca_2d(&codes), &best.labels, k))?;

    let selection = best.provenance.selection.clone();
    let normalized = match selection.as_ref().and_then(|s| s.soft_scores.clone().zip(s.hard_scores.clone())) {
        Some((soft, hard)) => CandidatePool::new(vec![soft, hard]).composite(),
        None => Vec::new(),
    };
    let eva = normalized.iter().find(|n| n.candidate_id == mode).map(|n| n.eva);

    let sizes = best.sizes();
    let checks = self_checks(&data, &outcome.model, &bytes, &model_path, &best.labels, k)?;
    let metrics = Metrics {
        timestamp: unix_time(),
        config: cfg.clone(),
        n_series: data.len(),
        k,
        seed,
        mode: mode.to_string(),
        scores: outcome.scores.clone(),
        normalized,
        eva,
        balance: balance_diagnostics(&best.labels, k)?,
        cluster_sizes: sizes,
        selection,
        joint: Some(JointInfo {
            pretrain_epochs: outcome.pretrain_history.len(),
            pretrain_final_loss: outcome.pretrain_history.last().copied(),
            joint_epochs: outcome.joint_history.len(),
            converged: outcome.converged,
        }),
        cluster_stats: stats,
        sweep: sweep.map(|s| SweepInfo {
            best_k_per_seed: cfg
                .seeds()
                .into_iter()
                .filter_map(|sd| s.report.best_k_for_seed(sd).map(|k| (sd, k)))
                .collect(),
            report: s.report,
            failures: s.failures,
        }),
        self_checks: checks.clone(),
    };
    write_text(&out.join("metrics.json"), &metrics_json(&metrics)?)?;
    if let Some(c) = checks.iter().find(|c| !c.passed) {
        return Err(CliError::SelfCheck(c.name.to_string()));
    }
    Ok(())
}

/// Invariants verified on every run before reporting success.
fn self_checks(
    data: &Prepared<f64>,
    model: &tsidec::Dcae<f64>,
    bytes: &[u8],
    model_path: &Path,
    labels: &[usize],
    k: usize,
) -> Result<Vec<SelfCheck>> {
    let (reloaded, _, _) = model_from_bytes(bytes, model_path)?;
    let probe = data.input.gather_rows(&(0..data.len().min(8)).collect::<Vec<_>>());
    let same_codes = model.encode(&probe)?.data() == reloaded.encode(&probe)?.data();
    Ok(vec![
        SelfCheck {
            name: "labels_cover_dataset",
            passed: labels.len() == data.len() && labels.iter().all(|&l| l < k),
        },
        SelfCheck {
            name: "model_round_trip",
            passed: same_codes,
        },
        SelfCheck {
            name: "finite_codes",
            passed: model.encode(&probe)?.all_finite(),
        },
    ])
}

pub fn baseline(a: &BaselineArgs) -> Result<()> {
    let dataset = load_dataset(&a.data)?;
    let cfg = PipelineConfig {
        resample_len: a.resample_len,
        ..PipelineConfig::default()
    };
    let data: Prepared<f64> = prepare(&dataset, &cfg)?;
    let curves: Vec<TimeSeries> = data
        .ids
        .iter()
        .zip(&data.curves)
        .map(|(id, c)| TimeSeries::new(id.clone(), c.clone()))
        .collect::<tsidec::Result<_>>()?;
    let out = &a.data.out;
    create_dir(out)?;
    let km = kmedoids_dtw(&curves, a.k, a.seed)?;
    let labels = &km.result.labels;
    write_text(&out.join("labels.csv"), &labels_csv(&data.ids, labels, "kmedoids_dtw"))?;
    write_text(&out.join("centers_timeseries.csv"), &centers_timeseries_csv(&data.curves, labels, a.k))?;
    let stats = cluster_stats(&dataset, labels, a.k);
    write_text(&out.join("cluster_stats.csv"), &stats_csv(&stats))?;
    write_text(&out.join("centers.svg"), &centers_svg(&data.curves, labels, a.k))?;
    let scores = RawScores::compute("kmedoids_dtw", &data.flat_input(), labels)
        .unwrap_or_else(|_| RawScores::degenerate("kmedoids_dtw"));
    let body = serde_json::json!({
        "timestamp": unix_time(),
        "method": "kmedoids_dtw",
        "k": a.k,
        "seed": a.seed,
        "resample_len": a.resample_len,
        "n_series": data.len(),
        "cost": km.cost,
        "iterations": km.iterations,
        "medoids": km.result.medoids,
        "scores": scores,
        "cluster_sizes": km.result.sizes(),
        "balance": balance_diagnostics(labels, a.k)?,
        "cluster_stats": stats,
    });
    write_text(&out.join("metrics.json"), &(serde_json::to_string_pretty(&body)? + "\n"))
}
