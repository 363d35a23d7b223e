//! Binary model files.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset      | content                                             |
//! |-------------|-----------------------------------------------------|
//! | 0           | magic `TSIDEC1\0`                                   |
//! | 8           | `u32` format version                                |
//! | 12          | `u32` header length `H`                             |
//! | 16          | `H` bytes of JSON header: input shape, architecture, layer lists, centroid shape |
//! | 16 + H      | every network parameter as `f64`, encoder then decoder, each layer's weights then biases |
//! | …           | centroids as `f64`, row-major                       |
//!
//! The file size is therefore `16 + H + 8 × (parameters + centroid values)`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tsidec::clustering::Centroids;
use tsidec::dcae::{Dcae, DcaeArch};
use tsidec::nn::{Layer, LayerSpec, Sequential};
use tsidec::Scalar;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"TSIDEC1\0";
pub const FORMAT_VERSION: u32 = 1;
/// Bytes before the JSON header.
pub const PREAMBLE_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLayer {
    pub name: String,
    pub spec: LayerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub input_rows: usize,
    pub input_cols: usize,
    pub latent_dim: usize,
    pub arch: DcaeArch,
    pub encoder: Vec<NamedLayer>,
    pub decoder: Vec<NamedLayer>,
    pub parameter_count: usize,
    pub centroid_k: usize,
    pub centroid_dim: usize,
}

fn layers<T: Scalar>(seq: &Sequential<T>) -> Vec<NamedLayer> {
    seq.layers
        .iter()
        .map(|l| NamedLayer {
            name: l.name.clone(),
            spec: l.spec,
        })
        .collect()
}

/// Serializes a model and its centroids.
pub fn model_bytes<T: Scalar>(model: &Dcae<T>, centroids: &Centroids<T>) -> Result<Vec<u8>> {
    let header = ModelHeader {
        input_rows: model.input_shape.0,
        input_cols: model.input_shape.1,
        latent_dim: model.latent_dim(),
        arch: model.arch,
        encoder: layers(&model.encoder),
        decoder: layers(&model.decoder),
        parameter_count: model.param_count(),
        centroid_k: centroids.k(),
        centroid_dim: centroids.dim(),
    };
    let json = serde_json::to_vec(&header)?;
    let values = model.flat_params();
    let mut out = Vec::with_capacity(PREAMBLE_LEN + json.len() + 8 * (values.len() + centroids.data().len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in values.iter().chain(centroids.data()) {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    Ok(out)
}

pub fn save_model<T: Scalar>(model: &Dcae<T>, centroids: &Centroids<T>, path: &Path) -> Result<()> {
    std::fs::write(path, model_bytes(model, centroids)?).map_err(|e| CliError::io(path, e))
}

/// Parses [`model_bytes`] output; `path` is only used in error messages.
pub fn model_from_bytes(bytes: &[u8], path: &Path) -> Result<(Dcae<f64>, Centroids<f64>, ModelHeader)> {
    let fail = |offset: usize, message: String| CliError::Model {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    let take = |offset: usize, len: usize, what: &str| -> Result<&[u8]> {
        bytes
            .get(offset..offset + len)
            .ok_or_else(|| fail(bytes.len().min(offset + len), format!("file truncated while reading {what}")))
    };
    if take(0, 8, "magic")? != MAGIC {
        return Err(fail(0, "bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(take(8, 4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(fail(8, format!("unsupported format version {version}, expected {FORMAT_VERSION}")));
    }
    let header_len = u32::from_le_bytes(take(12, 4, "header length")?.try_into().expect("4 bytes")) as usize;
    let header: ModelHeader = serde_json::from_slice(take(PREAMBLE_LEN, header_len, "header")?)
        .map_err(|e| fail(PREAMBLE_LEN, format!("invalid header: {e}")))?;

    let body = PREAMBLE_LEN + header_len;
    let n_centroid = header.centroid_k * header.centroid_dim;
    let expected = body + 8 * (header.parameter_count + n_centroid);
    if bytes.len() < expected {
        return Err(fail(bytes.len(), format!("file truncated: expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(fail(expected, format!("{} unexpected trailing bytes", bytes.len() - expected)));
    }
    let values: Vec<f64> = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let build = |list: &[NamedLayer]| Sequential::new(list.iter().map(|l| Layer::zeroed(l.name.clone(), l.spec)).collect());
    let mut encoder: Sequential<f64> = build(&header.encoder);
    let mut decoder: Sequential<f64> = build(&header.decoder);
    let (ne, nd) = (encoder.param_count(), decoder.param_count());
    if ne + nd != header.parameter_count {
        return Err(fail(PREAMBLE_LEN, format!(
            "header declares {} parameters but its layers hold {}",
            header.parameter_count,
            ne + nd
        )));
    }
    encoder.load_flat_params(&values[..ne])?;
    decoder.load_flat_params(&values[ne..ne + nd])?;
    let model = Dcae::from_parts(encoder, decoder, header.arch, (header.input_rows, header.input_cols))
        .map_err(|e| fail(PREAMBLE_LEN, format!("inconsistent layer list: {e}")))?;
    let centroids = Centroids::new(header.centroid_k, header.centroid_dim, values[ne + nd..].to_vec())
        .map_err(|e| fail(body + 8 * (ne + nd), e.to_string()))?;
    Ok((model, centroids, header))
}

pub fn load_model(path: &Path) -> Result<(Dcae<f64>, Centroids<f64>, ModelHeader)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    model_from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsidec::nn::Tensor;

    fn fixture() -> (Dcae<f64>, Centroids<f64>) {
        let model = Dcae::<f64>::build(12, 12, DcaeArch::toy(), 7).unwrap();
        let c = Centroids::new(2, 4, vec![0.5, -1.0, 2.0, 0.0, 1.5, 3.0, -0.25, 8.0]).unwrap();
        (model, c)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (model, c) = fixture();
        let bytes = model_bytes(&model, &c).unwrap();
        let (loaded, lc, header) = model_from_bytes(&bytes, Path::new("m")).unwrap();
        assert_eq!(lc, c);
        let x = Tensor::from_vec(vec![3, 1, 12, 12], (0..432).map(|i| ((i * 29) % 97) as f64 / 97.0).collect()).unwrap();
        assert_eq!(model.encode(&x).unwrap(), loaded.encode(&x).unwrap());
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), PREAMBLE_LEN + header_len + 8 * (model.param_count() + 8));
        assert_eq!(header.parameter_count, model.param_count());
    }

    #[test]
    fn corruption_is_reported_with_offsets() {
        let (model, c) = fixture();
        let bytes = model_bytes(&model, &c).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(model_from_bytes(&bad, Path::new("m")), Err(CliError::Model { offset: 0, .. })));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(model_from_bytes(&bad, Path::new("m")), Err(CliError::Model { offset: 8, .. })));
        let cut = &bytes[..bytes.len() - 5];
        let err = model_from_bytes(cut, Path::new("m")).unwrap_err();
        assert!(matches!(err, CliError::Model { offset, .. } if offset as usize == cut.len()), "{err}");
        assert!(model_from_bytes(&bytes[..10], Path::new("m")).is_err());
    }
}
