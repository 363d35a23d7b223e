//! Long-format CSV input: `series_id,timestamp,value`, plus an optional
//! metadata sidecar `series_id,<column>,…` (typically weight, energy, duration).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use tsidec::TimeSeries;

use crate::error::{CliError, Result};

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn number(path: &Path, line: u64, what: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{what} {text:?} is not a finite number"),
        })
}

/// Series in order of first appearance, each sorted by timestamp.
pub fn ingest_csv(path: &Path) -> Result<Vec<TimeSeries>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["series_id", "timestamp", "value"] {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header series_id,timestamp,value, got {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut points: HashMap<String, Vec<(f64, f64, u64)>> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: "empty series_id".into(),
            });
        }
        let t = number(path, line, "timestamp", &record[1])?;
        let v = number(path, line, "value", &record[2])?;
        points
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push((t, v, line));
    }
    if order.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut pts = points.remove(&id).expect("recorded id");
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: w[0].2.max(w[1].2),
                message: format!("duplicate timestamp {} for series {id:?}", w[1].0),
            });
        }
        out.push(TimeSeries::new(id, pts.into_iter().map(|p| p.1).collect())?);
    }
    Ok(out)
}

/// Attaches sidecar metadata; empty cells are skipped, unknown ids warned about.
pub fn ingest_metadata(path: &Path, dataset: &mut [TimeSeries]) -> Result<()> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("series_id") {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "metadata header must start with series_id".into(),
        });
    }
    let index: HashMap<String, usize> = dataset.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let Some(&i) = index.get(&record[0]) else {
            warn!("{}:{line}: metadata for unknown series {:?}", path.display(), &record[0]);
            continue;
        };
        for (name, cell) in header.iter().zip(record.iter()).skip(1) {
            if !cell.is_empty() {
                let v = number(path, line, name, cell)?;
                dataset[i].metadata.insert(name.to_string(), v);
            }
        }
    }
    Ok(())
}

/// Writes a dataset in the long format with integer timestamps.
pub fn write_long_csv(dataset: &[TimeSeries], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["series_id", "timestamp", "value"]).map_err(|e| csv_error(path, e))?;
    for s in dataset {
        for (t, v) in s.values.iter().enumerate() {
            w.write_record([s.id.as_str(), &t.to_string(), &v.to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes the metadata sidecar with the union of all columns (sorted).
pub fn write_metadata_csv(dataset: &[TimeSeries], path: &Path) -> Result<()> {
    let columns: Vec<String> = dataset
        .iter()
        .flat_map(|s| s.metadata.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["series_id".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for s in dataset {
        let mut row = vec![s.id.clone()];
        row.extend(columns.iter().map(|c| s.metadata.get(c).map_or(String::new(), |v| v.to_string())));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Metadata column names present on every series.
pub fn common_columns(dataset: &[TimeSeries]) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in dataset {
        for k in s.metadata.keys() {
            *counts.entry(k).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter_map(|(k, c)| {
            if c == dataset.len() {
                Some(k.to_string())
            } else {
                warn!("metadata column {k:?} is missing on {} series; omitted", dataset.len() - c);
                None
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn groups_and_sorts() {
        let f = file("series_id,timestamp,value\na,2,30\nb,0,1\na,0,10\na,1,20\nb,1,2\nb,2,3\n");
        let data = ingest_csv(f.path()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0].id, "a");
        assert_eq!(data[0].values, vec![10.0, 20.0, 30.0]);
        assert_eq!(data[1].values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let f = file("series_id,timestamp,value\na,0,1\na,1,oops\n");
        let err = ingest_csv(f.path()).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err}");
        let f = file("series_id,timestamp,value\na,0,1\na,0,2\n");
        assert!(matches!(ingest_csv(f.path()).unwrap_err(), CliError::Parse { line: 3, .. }));
        let f = file("id,t,v\na,0,1\n");
        assert!(matches!(ingest_csv(f.path()).unwrap_err(), CliError::Parse { line: 1, .. }));
    }

    #[test]
    fn metadata_sidecar() {
        let f = file("series_id,timestamp,value\na,0,1\na,1,2\nb,0,1\nb,1,5\n");
        let mut data = ingest_csv(f.path()).unwrap();
        let m = file("series_id,weight,energy,duration\na,10,500,3600\nb,12,,4000\nzz,1,1,1\n");
        ingest_metadata(m.path(), &mut data).unwrap();
        assert_eq!(data[0].metadata["energy"], 500.0);
        assert!(!data[1].metadata.contains_key("energy"));
        assert_eq!(common_columns(&data), vec!["duration".to_string(), "weight".to_string()]);
    }
}
