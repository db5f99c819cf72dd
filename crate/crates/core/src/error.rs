use std::path::PathBuf;

use thiserror::Error;

/// Stable codes reported by bundle ingestion, one per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum IngestCode {
    #[serde(rename = "E_MANIFEST")]
    Manifest,
    #[serde(rename = "E_MISSING_FILE")]
    MissingFile,
    #[serde(rename = "E_DUP_ID")]
    DuplicateId,
    #[serde(rename = "E_DIM")]
    Dimension,
    #[serde(rename = "E_EMBEDDING")]
    MalformedEmbedding,
    #[serde(rename = "E_SIDECAR")]
    Sidecar,
    #[serde(rename = "E_CANDIDATES")]
    TooFewCandidates,
    #[serde(rename = "E_PLY")]
    Ply,
    #[serde(rename = "E_ANNOTATIONS")]
    Annotations,
}

impl IngestCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IngestCode::Manifest => "E_MANIFEST",
            IngestCode::MissingFile => "E_MISSING_FILE",
            IngestCode::DuplicateId => "E_DUP_ID",
            IngestCode::Dimension => "E_DIM",
            IngestCode::MalformedEmbedding => "E_EMBEDDING",
            IngestCode::Sidecar => "E_SIDECAR",
            IngestCode::TooFewCandidates => "E_CANDIDATES",
            IngestCode::Ply => "E_PLY",
            IngestCode::Annotations => "E_ANNOTATIONS",
        }
    }
}

impl std::fmt::Display for IngestCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{code}: {detail}")]
    Ingest { code: IngestCode, detail: String },

    #[error("ply: {0}")]
    Ply(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn ingest(code: IngestCode, detail: impl Into<String>) -> Self {
        Error::Ingest {
            code,
            detail: detail.into(),
        }
    }

    /// Ingestion code, when this error came out of bundle validation.
    pub fn ingest_code(&self) -> Option<IngestCode> {
        match self {
            Error::Ingest { code, .. } => Some(*code),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
