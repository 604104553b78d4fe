//! Binary parameter container.
//!
//! Layout: the magic bytes `BTX1`, a little-endian `u64` manifest length,
//! the manifest as UTF-8 JSON, then every tensor's values as little-endian
//! `f64` in manifest order.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::param::{ParamGroup, Parameter};
use crate::error::{Error, Result};
use crate::rng::RngState;

pub const MAGIC: &[u8; 4] = b"BTX1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub group: ParamGroup,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub precision: String,
    pub tensors: Vec<TensorEntry>,
    pub rng: Option<RngState>,
    pub updates: u64,
    pub epoch: u64,
    /// Model-specific metadata (dimensions, vocabularies).
    pub meta: serde_json::Value,
}

pub fn encode(
    params: &[Parameter],
    rng: Option<RngState>,
    updates: u64,
    epoch: u64,
    meta: serde_json::Value,
) -> Vec<u8> {
    let manifest = Manifest {
        precision: "f64".into(),
        tensors: params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                group: p.group,
                rows: p.value.rows(),
                cols: p.value.cols(),
            })
            .collect(),
        rng,
        updates,
        epoch,
        meta,
    };
    let header = serde_json::to_vec(&manifest).expect("manifest serializes");
    let n_values: usize = params.iter().map(|p| p.value.len()).sum();
    let mut out = Vec::with_capacity(12 + header.len() + 8 * n_values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in params {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(Manifest, Vec<Parameter>)> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing BTX1 magic"));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(bad("truncated manifest"));
    }
    let manifest: Manifest = serde_json::from_slice(&body[..len])?;
    if manifest.precision != "f64" {
        return Err(Error::Checkpoint(format!(
            "unsupported precision {:?}",
            manifest.precision
        )));
    }
    let mut values = body[len..].chunks_exact(8);
    let expected: usize = manifest.tensors.iter().map(|t| t.rows * t.cols).sum();
    if body.len() - len != expected * 8 {
        return Err(Error::Checkpoint(format!(
            "expected {expected} values, found {} bytes",
            body.len() - len
        )));
    }
    let params = manifest
        .tensors
        .iter()
        .map(|t| {
            let data: Vec<f64> = values
                .by_ref()
                .take(t.rows * t.cols)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("non-finite value in {}", t.name)));
            }
            Ok(Parameter::new(
                t.name.clone(),
                t.group,
                Matrix::from_vec(t.rows, t.cols, data)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, params))
}
