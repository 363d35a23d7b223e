//! Small full runs: preprocessing, pretraining, joint training, selection.

use tsidec::baselines::kmedoids_dtw;
use tsidec::clustering::{qualitative_check, ClusterMode};
use tsidec::datagen::{default_palette, gen_dataset};
use tsidec::evaluation::adjusted_rand_index;
use tsidec::pipeline::{prepare, run_single, sweep_k, KChoice, PipelineConfig};

/// 24×24 matrices keep the default layer chain but run in seconds.
fn quick() -> PipelineConfig {
    PipelineConfig {
        window_size: 24,
        stride: 21,
        latent_dim: 16,
        pretrain_epochs: 8,
        epochs: 8,
        k: KChoice::Single(4),
        ..PipelineConfig::default()
    }
}

#[test]
fn single_run_is_valid_and_deterministic() {
    let (data, _) = gen_dataset(&default_palette(), 6, 5).unwrap();
    let cfg = quick();
    let prepared = prepare::<f64>(&data, &cfg).unwrap();
    assert_eq!(prepared.matrix_shape(), (24, 24));
    let a = run_single(&prepared, &cfg, 4, 1).unwrap();
    let b = run_single(&prepared, &cfg, 4, 1).unwrap();
    assert_eq!(a.best.labels, b.best.labels);
    assert_eq!(a.model.flat_params(), b.model.flat_params());
    assert_eq!(a.best.labels.len(), data.len());
    assert!(a.best.labels.iter().all(|&l| l < 4));
    assert_eq!(a.latent.shape(), &[data.len(), 16]);
    assert_eq!(a.pretrain_history.len(), 8);
    assert!(!a.joint_history.is_empty() && a.joint_history.len() <= 8);
    let selection = a.best.provenance.selection.as_ref().expect("provenance recorded");
    assert_eq!(a.best.mode, ClusterMode::Selected);
    let chosen = if selection.chosen == ClusterMode::SoftC1 { &a.soft } else { &a.hard };
    assert_eq!(chosen.labels, a.best.labels);
    if !selection.degenerate {
        assert!(qualitative_check(&a.best, cfg.min_cluster_frac).is_empty());
    }
}

#[test]
fn single_precision_pipeline_runs() {
    let (data, _) = gen_dataset(&default_palette(), 4, 9).unwrap();
    let cfg = PipelineConfig { pretrain_epochs: 3, epochs: 3, ..quick() };
    let prepared = prepare::<f32>(&data, &cfg).unwrap();
    let out = run_single(&prepared, &cfg, 4, 0).unwrap();
    assert_eq!(out.best.labels.len(), data.len());
    assert!(out.latent.all_finite());
}

#[test]
fn sweep_reports_every_k() {
    let (data, _) = gen_dataset(&default_palette(), 5, 11).unwrap();
    let cfg = PipelineConfig {
        k: KChoice::Range(2, 4),
        reps: 2,
        pretrain_epochs: 4,
        epochs: 4,
        ..quick()
    };
    let prepared = prepare::<f64>(&data, &cfg).unwrap();
    let out = sweep_k(&prepared, &cfg).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.report.runs.len(), 6);
    assert_eq!(out.report.rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![2, 3, 4]);
    let best = out.report.best_run();
    assert!((2..=4).contains(&best.k));
    assert!(out.report.to_csv().starts_with("k,runs,"));
    for seed in cfg.seeds() {
        assert!(out.report.best_k_for_seed(seed).is_some());
    }

    let single = PipelineConfig { k: KChoice::Range(3, 3), reps: 1, ..cfg };
    let out = sweep_k(&prepared, &single).unwrap();
    assert_eq!(out.report.best_run().k, 3);
}

#[test]
fn dtw_medoids_separate_clean_modes() {
    let (data, truth) = gen_dataset(&default_palette(), 5, 3).unwrap();
    let cfg = PipelineConfig { resample_len: 120, ..quick() };
    let prepared = prepare::<f64>(&data, &PipelineConfig { window_size: 12, stride: 11, ..cfg }).unwrap();
    let curves: Vec<_> = prepared
        .ids
        .iter()
        .zip(&prepared.curves)
        .map(|(id, c)| tsidec::TimeSeries::new(id.clone(), c.clone()).unwrap())
        .collect();
    let out = kmedoids_dtw(&curves, 4, 0).unwrap();
    let medoids = out.result.medoids.as_ref().unwrap();
    assert_eq!(medoids.len(), 4);
    for (j, &m) in medoids.iter().enumerate() {
        assert_eq!(out.result.labels[m], j);
    }
    let ari = adjusted_rand_index(&out.result.labels, &truth).unwrap();
    assert!(ari > 0.3, "ARI {ari}");
}
