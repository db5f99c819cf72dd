//! Wire payloads. Every response carries `v`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use replica_core::geometry::{PointCloud, PoseTransform};

pub const API_VERSION: u32 = 1;

/// Most scan points sent to a client.
pub const MAX_VIEW_POINTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub objects: usize,
    pub annotated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneList {
    pub v: u32,
    pub scenes: Vec<SceneSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    /// `scene:object`, accepted by the object endpoints.
    pub id: String,
    pub object_id: String,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    pub candidates: usize,
    pub annotated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectList {
    pub v: u32,
    pub scene_id: String,
    pub objects: Vec<ObjectSummary>,
}

/// A point cloud thinned by taking every `stride`-th point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudView {
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<[f64; 3]>>,
    pub total_points: usize,
    pub stride: usize,
}

impl CloudView {
    pub fn of(cloud: &PointCloud, max_points: usize) -> Self {
        let n = cloud.len();
        let stride = n.div_ceil(max_points.max(1)).max(1);
        let points = cloud.points().iter().step_by(stride).map(|p| [p.x, p.y, p.z]).collect();
        let colors = cloud.colors().map(|c| c.iter().step_by(stride).copied().collect());
        Self {
            points,
            colors,
            total_points: n,
            stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedImage {
    pub mime: String,
    /// Standard base64.
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub v: u32,
    pub scene_id: String,
    pub object_id: String,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<EncodedImage>,
    pub scan: CloudView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub asset_id: String,
    pub provenance: String,
    pub cloud: CloudView,
    /// Orthographic front view, PNG.
    pub thumbnail: EncodedImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub v: u32,
    pub scene_id: String,
    pub object_id: String,
    pub candidates: Vec<CandidateView>,
}

/// Body of an annotation POST. The object comes from the path; the server
/// stamps the time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSubmission {
    #[serde(default = "version")]
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    pub best_asset_id: String,
    pub transform: PoseTransform,
    pub ranking: Vec<String>,
    pub annotator_id: String,
}

fn version() -> u32 {
    API_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationReceipt {
    pub v: u32,
    pub record_id: u64,
    pub scene_id: String,
    pub object_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleQuery {
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSubmission {
    pub seed: u64,
    /// Record id to pass (`true`) or fail.
    pub verdicts: BTreeMap<u64, bool>,
}
