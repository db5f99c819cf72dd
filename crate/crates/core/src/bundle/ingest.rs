use std::collections::{BTreeSet, HashMap};
use std::path::{Component, Path, PathBuf};

use crate::annotation::{validate_record, AnnotationLog, ANNOTATIONS_FILE};
use crate::error::{Error, IngestCode, Result};
use crate::geometry::{ply, Aabb, PointCloud};
use crate::matching::{Candidate, CandidateSet, EmbeddingMatrix, EmbeddingVector, PointScorerWeights, Query};
use crate::scene::{SceneLayout, SceneObject};

use super::manifest::{EmbeddingRef, Manifest, ManifestObject, MANIFEST_FILE, MANIFEST_VERSION};

/// A validated scene bundle with scans and candidate embeddings loaded.
/// Candidate clouds are checked for existence and read on demand.
#[derive(Debug, Clone)]
pub struct SceneBundle {
    pub root: PathBuf,
    pub manifest: Manifest,
    /// Scan clouds in manifest object order, +z up.
    pub scans: Vec<PointCloud>,
    pub candidate_sets: Vec<CandidateSet>,
    pub scorer: Option<PointScorerWeights>,
    pub annotations: AnnotationLog,
}

fn err(code: IngestCode, detail: impl Into<String>) -> Error {
    Error::ingest(code, detail)
}

/// Resolves a bundle-relative path, refusing absolute paths and `..`.
pub fn resolve(root: &Path, rel: &str) -> Result<PathBuf> {
    let p = Path::new(rel);
    if rel.is_empty()
        || p.components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(err(
            IngestCode::Manifest,
            format!("path '{rel}' must stay inside the bundle"),
        ));
    }
    Ok(root.join(p))
}

fn require_file(root: &Path, rel: &str, what: &str) -> Result<PathBuf> {
    let path = resolve(root, rel)?;
    if !path.is_file() {
        return Err(err(IngestCode::MissingFile, format!("{what} '{rel}' not found")));
    }
    Ok(path)
}

/// Reads a PLY cloud and rotates it to +z up.
pub fn load_cloud(root: &Path, rel: &str, manifest: &Manifest) -> Result<PointCloud> {
    let path = require_file(root, rel, "cloud")?;
    let cloud = ply::read_ply(&path).map_err(|e| match e {
        Error::Io { .. } => err(IngestCode::MissingFile, format!("cloud '{rel}': {e}")),
        other => err(IngestCode::Ply, format!("cloud '{rel}': {other}")),
    })?;
    if cloud.is_empty() {
        return Err(err(IngestCode::Ply, format!("cloud '{rel}' has no points")));
    }
    Ok(manifest.up_axis.to_z_up(cloud))
}

/// Embedding matrices keyed by bundle-relative path.
#[derive(Default)]
pub struct EmbeddingCache {
    files: HashMap<String, EmbeddingMatrix>,
}

impl EmbeddingCache {
    pub fn vector(&mut self, root: &Path, r: &EmbeddingRef, id: &str) -> Result<EmbeddingVector> {
        if !self.files.contains_key(&r.file) {
            let path = require_file(root, &r.file, "embedding file")?;
            self.files.insert(r.file.clone(), EmbeddingMatrix::read(&path)?);
        }
        self.files[&r.file].vector(r.row, id)
    }
}

/// Builds the matching input for one manifest object. Query rows are named
/// by the object id in their sidecar, candidate rows by the asset id.
pub fn load_candidate_set(
    root: &Path,
    scene_id: &str,
    obj: &ManifestObject,
    cache: &mut EmbeddingCache,
) -> Result<CandidateSet> {
    if obj.candidates.len() < 2 {
        return Err(err(
            IngestCode::TooFewCandidates,
            format!(
                "object '{}' has {} candidates, needs at least 2",
                obj.id,
                obj.candidates.len()
            ),
        ));
    }
    let mut seen = BTreeSet::new();
    let mut candidates = Vec::with_capacity(obj.candidates.len());
    for c in &obj.candidates {
        if !seen.insert(c.asset_id.as_str()) {
            return Err(err(
                IngestCode::DuplicateId,
                format!("asset '{}' listed twice for object '{}'", c.asset_id, obj.id),
            ));
        }
        require_file(root, &c.cloud, "candidate cloud")?;
        candidates.push(Candidate {
            asset_id: c.asset_id.clone(),
            cloud: Some(c.cloud.clone()),
            embedding: cache.vector(root, &c.embedding, &c.asset_id)?,
            provenance: c.provenance.clone(),
        });
    }
    let query = Query {
        image: obj
            .query
            .image
            .as_ref()
            .map(|r| cache.vector(root, r, &obj.id))
            .transpose()?,
        text: obj
            .query
            .text
            .as_ref()
            .map(|r| cache.vector(root, r, &obj.id))
            .transpose()?,
    };
    let truth_index = obj
        .truth_asset_id
        .as_ref()
        .map(|t| {
            obj.candidates.iter().position(|c| &c.asset_id == t).ok_or_else(|| {
                err(
                    IngestCode::Manifest,
                    format!("truth asset '{t}' is not a candidate of '{}'", obj.id),
                )
            })
        })
        .transpose()?;
    let set = CandidateSet {
        scene_id: scene_id.to_string(),
        object_id: obj.id.clone(),
        candidates,
        truth_index,
        query,
    };
    set.validate().map_err(|e| match e {
        Error::DimensionMismatch { expected, got } => err(
            IngestCode::Dimension,
            format!("object '{}': embedding dimension {got}, expected {expected}", obj.id),
        ),
        other => other,
    })?;
    Ok(set)
}

impl SceneBundle {
    pub fn ingest(root: &Path) -> Result<Self> {
        let manifest_path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&manifest_path).map_err(|_| {
            err(
                IngestCode::MissingFile,
                format!("{} not found", manifest_path.display()),
            )
        })?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| err(IngestCode::Manifest, format!("{}: {e}", manifest_path.display())))?;
        if manifest.v != MANIFEST_VERSION {
            return Err(err(
                IngestCode::Manifest,
                format!("unsupported manifest version {}", manifest.v),
            ));
        }
        if manifest.scene_id.trim().is_empty() {
            return Err(err(IngestCode::Manifest, "scene_id is empty"));
        }
        let mut ids = BTreeSet::new();
        for o in &manifest.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(err(
                    IngestCode::DuplicateId,
                    format!("object id '{}' appears twice", o.id),
                ));
            }
        }

        let scorer = manifest
            .scorer
            .as_ref()
            .map(|rel| {
                let path = require_file(root, rel, "scorer")?;
                PointScorerWeights::load(&path).map_err(|e| err(IngestCode::Manifest, format!("scorer '{rel}': {e}")))
            })
            .transpose()?;

        let mut cache = EmbeddingCache::default();
        let mut scans = Vec::with_capacity(manifest.objects.len());
        let mut candidate_sets = Vec::with_capacity(manifest.objects.len());
        for o in &manifest.objects {
            scans.push(load_cloud(root, &o.scan, &manifest)?);
            if let Some(img) = &o.image {
                require_file(root, img, "image")?;
            }
            let set = load_candidate_set(root, &manifest.scene_id, o, &mut cache)?;
            if let Some(w) = &scorer {
                if w.dim() != set.dim() {
                    return Err(err(
                        IngestCode::Dimension,
                        format!("scorer has D = {} but object '{}' has D = {}", w.dim(), o.id, set.dim()),
                    ));
                }
            }
            candidate_sets.push(set);
        }

        let annotations = AnnotationLog::load(&root.join(ANNOTATIONS_FILE))?;
        for r in &annotations.records {
            let idx = manifest
                .objects
                .iter()
                .position(|o| o.id == r.record.object_id)
                .ok_or_else(|| {
                    err(
                        IngestCode::Annotations,
                        format!("record {} names unknown object '{}'", r.record_id, r.record.object_id),
                    )
                })?;
            let cands: Vec<&str> = manifest.objects[idx]
                .candidates
                .iter()
                .map(|c| c.asset_id.as_str())
                .collect();
            if let Some(e) = validate_record(&r.record, &cands).first() {
                return Err(err(
                    IngestCode::Annotations,
                    format!("record {}: {}: {}", r.record_id, e.field, e.reason),
                ));
            }
        }

        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            scans,
            candidate_sets,
            scorer,
            annotations,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.manifest.scene_id
    }

    pub fn object_index(&self, object_id: &str) -> Result<usize> {
        self.manifest
            .objects
            .iter()
            .position(|o| o.id == object_id)
            .ok_or_else(|| Error::NotFound(format!("object '{object_id}' in scene '{}'", self.scene_id())))
    }

    pub fn asset_cloud(&self, object_id: &str, asset_id: &str) -> Result<PointCloud> {
        let obj = &self.manifest.objects[self.object_index(object_id)?];
        let c = obj
            .candidates
            .iter()
            .find(|c| c.asset_id == asset_id)
            .ok_or_else(|| Error::NotFound(format!("asset '{asset_id}' for object '{object_id}'")))?;
        load_cloud(&self.root, &c.cloud, &self.manifest)
    }

    pub fn scan(&self, object_id: &str) -> Result<&PointCloud> {
        Ok(&self.scans[self.object_index(object_id)?])
    }

    pub fn scan_boxes(&self) -> Result<Vec<Aabb>> {
        self.scans.iter().map(PointCloud::aabb).collect()
    }

    /// Ground-truth asset: the latest annotation, else the manifest's truth.
    pub fn truth_asset(&self, object_id: &str) -> Option<String> {
        self.annotations
            .latest(object_id)
            .map(|r| r.record.best_asset_id.clone())
            .or_else(|| self.manifest.object(object_id).and_then(|o| o.truth_asset_id.clone()))
    }

    /// The placed layout if the pipeline wrote one, else scan boxes.
    pub fn layout(&self) -> Result<SceneLayout> {
        if let Some(l) = &self.manifest.layout {
            return Ok(l.clone());
        }
        let objects = self
            .manifest
            .objects
            .iter()
            .zip(&self.scans)
            .map(|(o, s)| Ok(SceneObject::new(o.id.clone(), o.category.clone(), s.aabb()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneLayout {
            scene_id: self.manifest.scene_id.clone(),
            floor: self.manifest.floor.clone(),
            floor_z: self.manifest.floor_z,
            objects,
        })
    }
}
