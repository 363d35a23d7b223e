//! Resampling, intensity scaling and overlapping sliding-window stacking.
//!
//! A series of length `N` is cut into windows of `window_size` samples that
//! advance by `stride` samples (overlap `window_size - stride`). Windows are
//! stacked as rows. When the last window would run past the end, the series is
//! extended by repeating its final value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::nn::Tensor;
use crate::Scalar;

/// One univariate sampled signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<f64>,
    /// Named scalar attributes (weight, energy, duration, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, f64>,
}

impl TimeSeries {
    /// Builds a series, rejecting empty or non-finite values.
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(invalid_input(format!("series {id:?} is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid_input(format!(
                "series {id:?} has a non-finite value at index {i}"
            )));
        }
        Ok(Self {
            id,
            values,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, f64>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            id: self.id.clone(),
            values,
            metadata: self.metadata.clone(),
        }
    }
}

/// Grayscale matrix built from one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, every entry in `[0, 1]` for unit-normalized sources.
    pub data: Vec<f64>,
    pub window_size: usize,
    pub stride: usize,
    pub pad_count: usize,
    pub source_id: String,
}

impl SeriesMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rebuilds the padded series: row 0 followed by the trailing `stride`
    /// samples of every later row.
    pub fn unwindow(&self) -> Vec<f64> {
        let mut out = self.row(0).to_vec();
        for r in 1..self.rows {
            let row = self.row(r);
            out.extend_from_slice(&row[self.cols - self.stride..]);
        }
        out
    }
}

/// Linear interpolation onto `target_len` evenly spaced positions.
///
/// Output sample `i` sits at source position `i·(N−1)/(target_len−1)`; both
/// endpoints are carried over exactly.
pub fn resample_linear(series: &TimeSeries, target_len: usize) -> Result<TimeSeries> {
    let n = series.len();
    if target_len < 2 {
        return Err(invalid_input(format!("target length {target_len} < 2")));
    }
    if n < 2 {
        return Err(invalid_input(format!(
            "series {:?} has {n} samples, need at least 2 to resample",
            series.id
        )));
    }
    if n == target_len {
        return Ok(series.clone());
    }
    let v = &series.values;
    let scale = (n - 1) as f64 / (target_len - 1) as f64;
    let mut out = Vec::with_capacity(target_len);
    for i in 0..target_len {
        if i == target_len - 1 {
            out.push(v[n - 1]);
            continue;
        }
        let pos = i as f64 * scale;
        let lo = (pos.floor() as usize).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        let t = pos - lo as f64;
        out.push(if t == 0.0 {
            v[lo]
        } else {
            v[lo] + (v[hi] - v[lo]) * t
        });
    }
    Ok(series.with_values(out))
}

/// Min–max scaling to `[0, 1]`; a constant series maps to 0.5 everywhere.
pub fn normalize_unit(series: &TimeSeries) -> Result<TimeSeries> {
    if series.is_empty() {
        return Err(invalid_input(format!("series {:?} is empty", series.id)));
    }
    let (lo, hi) = series
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(invalid_input(format!(
            "series {:?} has non-finite values",
            series.id
        )));
    }
    let range = hi - lo;
    let values = if range == 0.0 {
        vec![0.5; series.len()]
    } else {
        series
            .values
            .iter()
            .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
            .collect()
    };
    Ok(series.with_values(values))
}

fn check_window(window_size: usize, stride: usize) -> Result<()> {
    if window_size == 0 {
        return Err(invalid_param("window size must be at least 1"));
    }
    if stride == 0 || stride > window_size {
        return Err(invalid_param(format!(
            "stride {stride} must lie in [1, {window_size}] (windows must advance and may not leave gaps)"
        )));
    }
    Ok(())
}

/// Number of stacked windows needed to cover `n` samples.
pub fn row_count(n: usize, window_size: usize, stride: usize) -> Result<usize> {
    check_window(window_size, stride)?;
    if n <= window_size {
        return Ok(1);
    }
    Ok((n - window_size).div_ceil(stride) + 1)
}

/// Samples consumed by `rows` windows; the square case `rows == window_size`
/// is `n_s + (n_s − 1)(n_s − n_o)`.
pub fn required_length(window_size: usize, stride: usize, rows: usize) -> Result<usize> {
    check_window(window_size, stride)?;
    if rows == 0 {
        return Err(invalid_param("row count must be at least 1"));
    }
    Ok(window_size + (rows - 1) * stride)
}

/// Stacks overlapping windows of `series` into a matrix, edge-padding the tail.
pub fn window_transform(
    series: &TimeSeries,
    window_size: usize,
    stride: usize,
) -> Result<SeriesMatrix> {
    if series.is_empty() {
        return Err(invalid_input(format!("series {:?} is empty", series.id)));
    }
    let n = series.len();
    let rows = row_count(n, window_size, stride)?;
    let total = required_length(window_size, stride, rows)?;
    let pad_count = total - n;
    let last = series.values[n - 1];
    let padded: Vec<f64> = series
        .values
        .iter()
        .copied()
        .chain(std::iter::repeat_n(last, pad_count))
        .collect();
    let mut data = Vec::with_capacity(rows * window_size);
    for r in 0..rows {
        let start = r * stride;
        data.extend_from_slice(&padded[start..start + window_size]);
    }
    Ok(SeriesMatrix {
        rows,
        cols: window_size,
        data,
        window_size,
        stride,
        pad_count,
        source_id: series.id.clone(),
    })
}

/// Full preprocessing for one series: resample, scale to `[0, 1]`, window.
pub fn prepare_series(
    series: &TimeSeries,
    target_len: usize,
    window_size: usize,
    stride: usize,
) -> Result<SeriesMatrix> {
    let resampled = resample_linear(series, target_len)?;
    let unit = normalize_unit(&resampled)?;
    window_transform(&unit, window_size, stride)
}

/// Packs equally shaped matrices into an `n×1×rows×cols` batch tensor.
pub fn stack_matrices<T: Scalar>(matrices: &[SeriesMatrix]) -> Result<Tensor<T>> {
    let first = matrices
        .first()
        .ok_or_else(|| invalid_input("no matrices to stack"))?;
    let (rows, cols) = (first.rows, first.cols);
    let mut data = Vec::with_capacity(matrices.len() * rows * cols);
    for m in matrices {
        if (m.rows, m.cols) != (rows, cols) {
            return Err(invalid_input(format!(
                "matrix for {:?} is {}×{}, expected {rows}×{cols}",
                m.source_id, m.rows, m.cols
            )));
        }
        data.extend(m.data.iter().map(|&v| T::lit(v)));
    }
    Tensor::from_vec(vec![matrices.len(), 1, rows, cols], data)
}
