//! Embedding vectors, the affine point scorer, and their on-disk formats.
//!
//! Embedding matrix files are a 12-byte header (`EMB1` magic, `D: u32`,
//! `N: u32`, little-endian) followed by `N × D` little-endian float32 rows.
//! A sidecar JSON file `{"v": 1, "rows": [id, ...]}` names each row.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IngestCode, Result};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"EMB1";
const HEADER_LEN: usize = 12;

/// Allowed deviation of ‖v‖₂ from 1 for a vector to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireVector")]
pub struct EmbeddingVector {
    values: Vec<f64>,
    normalized: bool,
}

#[derive(Deserialize)]
struct WireVector {
    values: Vec<f64>,
    #[serde(default)]
    normalized: Option<bool>,
}

impl TryFrom<WireVector> for EmbeddingVector {
    type Error = Error;

    fn try_from(w: WireVector) -> Result<Self> {
        let v = Self::new(w.values)?;
        if w.normalized == Some(true) && !v.normalized {
            return Err(Error::InvalidInput(
                "embedding flagged normalized but its norm is not 1".into(),
            ));
        }
        Ok(v)
    }
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding has zero dimensions".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("embedding has non-finite entries".into()));
        }
        let norm = l2(&values);
        Ok(Self {
            normalized: (norm - 1.0).abs() <= NORM_TOLERANCE,
            values,
        })
    }

    /// Unit-length copy.
    pub fn unit(values: Vec<f64>) -> Result<Self> {
        Self::new(values)?.normalize()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = l2(&self.values);
        if norm == 0.0 {
            return Err(Error::InvalidInput("cannot normalize a zero embedding".into()));
        }
        Ok(Self {
            values: self.values.iter().map(|v| v / norm).collect(),
            normalized: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Affine map from a point-cloud embedding to a scalar matching score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireWeights", into = "WireWeights")]
pub struct PointScorerWeights {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
struct WireWeights {
    #[serde(rename = "D")]
    d: usize,
    weights: Vec<f64>,
    bias: f64,
}

impl TryFrom<WireWeights> for PointScorerWeights {
    type Error = Error;

    fn try_from(w: WireWeights) -> Result<Self> {
        if w.weights.len() != w.d {
            return Err(Error::DimensionMismatch {
                expected: w.d,
                got: w.weights.len(),
            });
        }
        PointScorerWeights::new(w.weights, w.bias)
    }
}

impl From<PointScorerWeights> for WireWeights {
    fn from(p: PointScorerWeights) -> Self {
        WireWeights {
            d: p.weights.len(),
            weights: p.weights,
            bias: p.bias,
        }
    }
}

impl PointScorerWeights {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().chain([&bias]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "scorer weights must be non-empty and finite".into(),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A loaded embedding file with its row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f32>>,
    pub ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    v: u32,
    rows: Vec<String>,
}

/// Sidecar path for an embedding file: same stem, `.json` extension.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn encode_embeddings(dim: usize, rows: &[Vec<f32>]) -> Result<Vec<u8>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + rows.len() * dim * 4);
    out.extend_from_slice(&EMBEDDING_MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<(usize, Vec<Vec<f32>>)> {
    let bad = |m: String| Error::ingest(IngestCode::MalformedEmbedding, m);
    if bytes.len() < HEADER_LEN || bytes[..4] != EMBEDDING_MAGIC {
        return Err(bad("missing EMB1 header".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(bad("embedding dimension is zero".into()));
    }
    let expected = HEADER_LEN + n * dim * 4;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for {n}×{dim} rows, found {}",
            bytes.len()
        )));
    }
    let rows: Vec<Vec<f32>> = bytes[HEADER_LEN..]
        .chunks_exact(dim * 4)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect();
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(bad("non-finite embedding entry".into()));
    }
    Ok((dim, rows))
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, rows: Vec<Vec<f32>>, ids: Vec<String>) -> Result<Self> {
        if rows.len() != ids.len() {
            return Err(Error::ingest(
                IngestCode::Sidecar,
                format!("{} rows but {} sidecar ids", rows.len(), ids.len()),
            ));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::ingest(
                IngestCode::Dimension,
                format!("row of length {} in a D = {dim} matrix", r.len()),
            ));
        }
        Ok(Self { dim, rows, ids })
    }

    pub fn read(bin: &Path) -> Result<Self> {
        let bytes = fs::read(bin)
            .map_err(|_| Error::ingest(IngestCode::MissingFile, format!("embedding file {}", bin.display())))?;
        let (dim, rows) = decode_embeddings(&bytes)?;
        let side = sidecar_path(bin);
        let text = fs::read_to_string(&side)
            .map_err(|_| Error::ingest(IngestCode::MissingFile, format!("embedding sidecar {}", side.display())))?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::ingest(IngestCode::Sidecar, format!("{}: {e}", side.display())))?;
        Self::new(dim, rows, sidecar.rows)
    }

    pub fn write(&self, bin: &Path) -> Result<()> {
        crate::bundle::write_atomic(bin, &encode_embeddings(self.dim, &self.rows)?)?;
        crate::bundle::write_sorted_json(
            &sidecar_path(bin),
            &Sidecar {
                v: 1,
                rows: self.ids.clone(),
            },
        )
    }

    /// Row `row` as an embedding, checking the sidecar names it `id`.
    pub fn vector(&self, row: usize, id: &str) -> Result<EmbeddingVector> {
        let values = self.rows.get(row).ok_or_else(|| {
            Error::ingest(
                IngestCode::MalformedEmbedding,
                format!("row {row} out of range for '{id}'"),
            )
        })?;
        if self.ids[row] != id {
            return Err(Error::ingest(
                IngestCode::Sidecar,
                format!("row {row} is '{}' in the sidecar, expected '{id}'", self.ids[row]),
            ));
        }
        EmbeddingVector::new(values.iter().map(|&v| v as f64).collect())
            .map_err(|e| Error::ingest(IngestCode::MalformedEmbedding, e.to_string()))
    }
}
