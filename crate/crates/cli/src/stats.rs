//! Per-cluster summaries of series metadata.

use std::collections::BTreeMap;

use log::info;
use serde::Serialize;
use tsidec::TimeSeries;

use crate::ingest::common_columns;

/// Column used as the denominator of per-unit ratios.
pub const RATIO_BASE: &str = "weight";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterStats {
    pub cluster: usize,
    pub cardinality: usize,
    /// Mean `duration` metadata when every series has it, otherwise the
    /// mean native length in samples.
    pub mean_duration: Option<f64>,
    /// Mean of each other metadata column present on every series.
    pub means: BTreeMap<String, f64>,
    /// `<column>_per_weight`: cluster total of the column over total weight.
    pub ratios: BTreeMap<String, f64>,
}

pub fn cluster_stats(dataset: &[TimeSeries], labels: &[usize], k: usize) -> Vec<ClusterStats> {
    let columns = common_columns(dataset);
    let has_duration = columns.iter().any(|c| c == "duration");
    (0..k)
        .map(|cluster| {
            let members: Vec<&TimeSeries> = dataset
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == cluster)
                .map(|(s, _)| s)
                .collect();
            let n = members.len();
            let total = |col: &str| members.iter().map(|s| s.metadata[col]).sum::<f64>();
            let mean_duration = (n > 0).then(|| {
                if has_duration {
                    total("duration") / n as f64
                } else {
                    members.iter().map(|s| s.len() as f64).sum::<f64>() / n as f64
                }
            });
            let mut means = BTreeMap::new();
            let mut ratios = BTreeMap::new();
            if n > 0 {
                for c in columns.iter().filter(|c| *c != "duration") {
                    means.insert(c.clone(), total(c) / n as f64);
                }
                if columns.iter().any(|c| c == RATIO_BASE) {
                    let base = total(RATIO_BASE);
                    for c in columns.iter().filter(|c| *c != RATIO_BASE) {
                        if base != 0.0 {
                            ratios.insert(format!("{c}_per_{RATIO_BASE}"), total(c) / base);
                        }
                    }
                }
            } else {
                info!("cluster {cluster} is empty");
            }
            ClusterStats {
                cluster,
                cardinality: n,
                mean_duration,
                means,
                ratios,
            }
        })
        .collect()
}

/// CSV rendering with a stable column order.
pub fn stats_csv(stats: &[ClusterStats]) -> String {
    let mean_cols: Vec<String> = stats.iter().flat_map(|s| s.means.keys().cloned()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let ratio_cols: Vec<String> = stats.iter().flat_map(|s| s.ratios.keys().cloned()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut out = String::from("cluster,cardinality,mean_duration");
    for c in &mean_cols {
        out.push_str(&format!(",mean_{c}"));
    }
    for c in &ratio_cols {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    let cell = |v: Option<&f64>| v.map_or(String::new(), |v| v.to_string());
    for s in stats {
        out.push_str(&format!("{},{},{}", s.cluster, s.cardinality, cell(s.mean_duration.as_ref())));
        for c in &mean_cols {
            out.push_str(&format!(",{}", cell(s.means.get(c))));
        }
        for c in &ratio_cols {
            out.push_str(&format!(",{}", cell(s.ratios.get(c))));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, len: usize, meta: &[(&str, f64)]) -> TimeSeries {
        TimeSeries::new(id, vec![1.0; len])
            .unwrap()
            .with_metadata(meta.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn cardinalities_and_ratios() {
        let data = vec![
            series("a", 3, &[("weight", 10.0), ("energy", 100.0), ("duration", 60.0)]),
            series("b", 4, &[("weight", 30.0), ("energy", 200.0), ("duration", 120.0)]),
            series("c", 5, &[("weight", 5.0), ("energy", 90.0), ("duration", 30.0)]),
        ];
        let s = cluster_stats(&data, &[0, 0, 1], 3);
        assert_eq!(s.iter().map(|c| c.cardinality).sum::<usize>(), 3);
        assert_eq!(s[0].mean_duration, Some(90.0));
        assert_eq!(s[0].means["energy"], 150.0);
        assert_eq!(s[0].ratios["energy_per_weight"], 7.5);
        assert_eq!(s[2].cardinality, 0);
        assert!(stats_csv(&s).starts_with("cluster,cardinality,mean_duration,mean_energy,mean_weight,duration_per_weight,energy_per_weight\n"));
    }

    #[test]
    fn no_metadata() {
        let data = vec![series("a", 3, &[]), series("b", 5, &[])];
        let s = cluster_stats(&data, &[0, 0], 1);
        assert_eq!(s[0].mean_duration, Some(4.0));
        assert!(s[0].means.is_empty() && s[0].ratios.is_empty());
        assert_eq!(stats_csv(&s), "cluster,cardinality,mean_duration\n0,2,4\n");
    }
}
