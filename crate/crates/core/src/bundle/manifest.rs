use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::{FloorPolygon, PointCloud};
use crate::scene::SceneLayout;
use crate::scene_graph::SceneGraph;

pub const MANIFEST_FILE: &str = "scene.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Up axis of the clouds on disk. Everything in memory is +z up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    #[default]
    Z,
    Y,
}

impl UpAxis {
    /// Rotates a cloud from this convention into +z up.
    pub fn to_z_up(self, cloud: PointCloud) -> PointCloud {
        match self {
            UpAxis::Z => cloud,
            UpAxis::Y => cloud.map_points(|p| Point3::new(p.x, -p.z, p.y)),
        }
    }
}

/// One row of an embedding file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRef {
    pub file: String,
    pub row: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRefs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<EmbeddingRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<EmbeddingRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRef {
    pub asset_id: String,
    /// Bundle-relative PLY path.
    pub cloud: String,
    pub embedding: EmbeddingRef,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: String,
    pub category: String,
    /// Bundle-relative PLY path of the segmented scan.
    pub scan: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default)]
    pub query: QueryRefs,
    pub candidates: Vec<CandidateRef>,
    /// Known correct asset for synthetic bundles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_asset_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub scene_id: String,
    #[serde(default)]
    pub up_axis: UpAxis,
    #[serde(default)]
    pub floor_z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<FloorPolygon>,
    /// Bundle-relative path of the point-scorer weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<String>,
    pub objects: Vec<ManifestObject>,
    /// Placed layout written by the pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<SceneLayout>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_graph: Option<SceneGraph>,
}

impl Manifest {
    pub fn new(scene_id: impl Into<String>, objects: Vec<ManifestObject>) -> Self {
        Self {
            v: MANIFEST_VERSION,
            scene_id: scene_id.into(),
            up_axis: UpAxis::Z,
            floor_z: 0.0,
            floor: None,
            scorer: None,
            objects,
            layout: None,
            scene_graph: None,
        }
    }

    pub fn object(&self, id: &str) -> Option<&ManifestObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Every bundle-relative file the manifest points at, deduplicated, in
    /// first-mention order. Embedding files are followed by their sidecars.
    pub fn referenced_files(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |p: &str| {
            if !out.iter().any(|q| q == p) {
                out.push(p.to_string());
            }
        };
        let embedding = |r: &EmbeddingRef, push: &mut dyn FnMut(&str)| {
            push(&r.file);
            push(&crate::matching::sidecar_path(std::path::Path::new(&r.file)).to_string_lossy());
        };
        if let Some(s) = &self.scorer {
            push(s);
        }
        for o in &self.objects {
            push(&o.scan);
            if let Some(i) = &o.image {
                push(i);
            }
            for r in [&o.query.image, &o.query.text].into_iter().flatten() {
                embedding(r, &mut push);
            }
            for c in &o.candidates {
                push(&c.cloud);
                embedding(&c.embedding, &mut push);
            }
        }
        out
    }
}
