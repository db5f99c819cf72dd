//! Scene bundles on disk: manifest, ingestion, deterministic JSON output and
//! the training export.

mod ingest;
mod json;
mod manifest;
mod training;

pub use ingest::{load_candidate_set, load_cloud, resolve, EmbeddingCache, SceneBundle};
pub use json::{sort_keys, to_sorted_json, write_atomic, write_sorted_json};
pub use manifest::{
    CandidateRef, EmbeddingRef, Manifest, ManifestObject, QueryRefs, UpAxis, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use training::{
    discover_bundles, export_training_root, export_training_set, qualified_id, split_qualified, TrainingExport,
    TrainingQuadruple, TRAINING_FILE, TRAINING_VERSION,
};
