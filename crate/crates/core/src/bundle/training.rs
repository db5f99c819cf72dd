use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationRecord;
use crate::error::{Error, Result};
use crate::matching::CandidateSet;

use super::ingest::SceneBundle;
use super::manifest::MANIFEST_FILE;

pub const TRAINING_VERSION: u32 = 1;
pub const TRAINING_FILE: &str = "training.json";

/// One labelled matching example: the candidate set with `truth_index` set to
/// the annotated best asset, plus the record it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingQuadruple {
    pub record_id: u64,
    pub set: CandidateSet,
    pub annotation: AnnotationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExport {
    pub v: u32,
    pub quadruples: Vec<TrainingQuadruple>,
    /// `scene:object` ids with no annotation yet.
    pub unannotated: Vec<String>,
}

/// `scene:object`, the id used wherever objects from several scenes mix.
pub fn qualified_id(scene_id: &str, object_id: &str) -> String {
    format!("{scene_id}:{object_id}")
}

/// Splits `scene:object`; a bare id yields `None` for the scene.
pub fn split_qualified(id: &str) -> (Option<&str>, &str) {
    match id.split_once(':') {
        Some((s, o)) => (Some(s), o),
        None => (None, id),
    }
}

/// Bundle directories under `root`, sorted by path. A root that is itself a
/// bundle yields just itself.
pub fn discover_bundles(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|e| Error::io(root, e))?.path();
        if path.join(MANIFEST_FILE).is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Labelled quadruples from each object's latest annotation. Objects are
/// visited in scene order, then manifest order.
pub fn export_training_set(bundles: &[SceneBundle]) -> Result<TrainingExport> {
    let mut sorted: Vec<&SceneBundle> = bundles.iter().collect();
    sorted.sort_by(|a, b| a.scene_id().cmp(b.scene_id()));
    let mut quadruples = Vec::new();
    let mut unannotated = Vec::new();
    for b in sorted {
        for (obj, set) in b.manifest.objects.iter().zip(&b.candidate_sets) {
            let Some(stored) = b.annotations.latest(&obj.id) else {
                unannotated.push(qualified_id(b.scene_id(), &obj.id));
                continue;
            };
            let truth = set
                .candidates
                .iter()
                .position(|c| c.asset_id == stored.record.best_asset_id)
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "record {} picks '{}', not a candidate of '{}'",
                        stored.record_id, stored.record.best_asset_id, obj.id
                    ))
                })?;
            let mut set = set.clone();
            set.truth_index = Some(truth);
            quadruples.push(TrainingQuadruple {
                record_id: stored.record_id,
                set,
                annotation: stored.record.clone(),
            });
        }
    }
    Ok(TrainingExport {
        v: TRAINING_VERSION,
        quadruples,
        unannotated,
    })
}

/// Ingests every bundle under `root` and exports them together.
pub fn export_training_root(root: &Path) -> Result<TrainingExport> {
    let bundles = discover_bundles(root)?
        .iter()
        .map(|p| SceneBundle::ingest(p))
        .collect::<Result<Vec<_>>>()?;
    if bundles.is_empty() {
        return Err(Error::NotFound(format!("no scene bundles under {}", root.display())));
    }
    export_training_set(&bundles)
}

impl TrainingExport {
    /// Parses an export and checks every set is usable by the matcher.
    pub fn from_json(text: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(text)?;
        if e.v != TRAINING_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported training export version {}",
                e.v
            )));
        }
        for q in &e.quadruples {
            q.set.validate()?;
            if q.set.truth_index.is_none() {
                return Err(Error::InvalidInput(format!(
                    "quadruple {} has no truth_index",
                    q.record_id
                )));
            }
        }
        Ok(e)
    }
}
