//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys match the
//! [`PipelineConfig`] fields; `k = 4` selects one cluster count and
//! `k_range = 3..8` (or `3-8`) an inclusive sweep.

use std::path::Path;

use tsidec::pipeline::{EvalSpace, KChoice, PipelineConfig};

use crate::error::{CliError, Result};

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_range(value: &str) -> std::result::Result<KChoice, String> {
    let (lo, hi) = value
        .split_once("..=")
        .or_else(|| value.split_once(".."))
        .or_else(|| value.split_once('-'))
        .ok_or_else(|| format!("k_range: expected LO..HI, got {value:?}"))?;
    Ok(KChoice::Range(parse("k_range", lo.trim())?, parse("k_range", hi.trim())?))
}

/// Sets one field from its textual value.
pub fn apply(cfg: &mut PipelineConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let value = value.trim();
    match key.trim().replace('-', "_").as_str() {
        "resample_len" => cfg.resample_len = parse(key, value)?,
        "window_size" => cfg.window_size = parse(key, value)?,
        "stride" => cfg.stride = parse(key, value)?,
        "latent_dim" => cfg.latent_dim = parse(key, value)?,
        "alpha" => cfg.alpha = parse(key, value)?,
        "gamma" => cfg.gamma = parse(key, value)?,
        "lr" => cfg.lr = parse(key, value)?,
        "batch_size" => cfg.batch_size = parse(key, value)?,
        "pretrain_epochs" => cfg.pretrain_epochs = parse(key, value)?,
        "epochs" => cfg.epochs = parse(key, value)?,
        "k" => cfg.k = KChoice::Single(parse(key, value)?),
        "k_range" => cfg.k = parse_range(value)?,
        "reps" => cfg.reps = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "eval_space" => {
            cfg.eval_space = match value {
                "input" => EvalSpace::Input,
                "latent" => EvalSpace::Latent,
                other => return Err(format!("eval_space: expected input or latent, got {other:?}")),
            }
        }
        "min_cluster_frac" => cfg.min_cluster_frac = parse(key, value)?,
        "tol" => cfg.tol = parse(key, value)?,
        other => return Err(format!("unknown key {other:?}")),
    }
    Ok(())
}

pub fn parse_config(text: &str, path: &Path) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        apply(&mut cfg, key, value).map_err(err)?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, path)
}

/// Renders a configuration in the file format (round-trips through
/// [`parse_config`]).
pub fn render_config(cfg: &PipelineConfig) -> String {
    let k = match cfg.k {
        KChoice::Single(k) => format!("k = {k}"),
        KChoice::Range(lo, hi) => format!("k_range = {lo}..{hi}"),
    };
    let space = match cfg.eval_space {
        EvalSpace::Input => "input",
        EvalSpace::Latent => "latent",
    };
    format!(
        "resample_len = {}\nwindow_size = {}\nstride = {}\nlatent_dim = {}\nalpha = {}\ngamma = {}\nlr = {}\n\
         batch_size = {}\npretrain_epochs = {}\nepochs = {}\n{k}\nreps = {}\nseed = {}\neval_space = {space}\n\
         min_cluster_frac = {}\ntol = {}\n",
        cfg.resample_len,
        cfg.window_size,
        cfg.stride,
        cfg.latent_dim,
        cfg.alpha,
        cfg.gamma,
        cfg.lr,
        cfg.batch_size,
        cfg.pretrain_epochs,
        cfg.epochs,
        cfg.reps,
        cfg.seed,
        cfg.min_cluster_frac,
        cfg.tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# demo\nwindow_size = 24\nstride=12\nk_range = 3..6\neval_space = latent\n\n";
        let cfg = parse_config(text, Path::new("c.conf")).unwrap();
        assert_eq!((cfg.window_size, cfg.stride), (24, 12));
        assert_eq!(cfg.k, KChoice::Range(3, 6));
        assert_eq!(cfg.eval_space, EvalSpace::Latent);
        assert_eq!(parse_config(&render_config(&cfg), Path::new("r")).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_config("k = 4\nstride = x\n", Path::new("c.conf")).unwrap_err().to_string();
        assert!(err.starts_with("c.conf:2:"), "{err}");
        assert!(parse_config("bogus = 1", Path::new("c")).is_err());
        assert!(parse_config("just text", Path::new("c")).is_err());
    }
}
