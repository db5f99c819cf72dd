//! Placed scene objects and micro-scenes.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, FloorPolygon, PoseTransform};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementStatus {
    /// A matched asset was aligned onto the scan.
    #[default]
    Placed,
    /// Matching or alignment failed; the scan's own box stands in.
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    pub bbox: Aabb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<PoseTransform>,
    /// Candidate asset ids, best first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranking: Vec<String>,
    #[serde(default)]
    pub status: PlacementStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SceneObject {
    pub fn new(id: impl Into<String>, category: impl Into<String>, bbox: Aabb) -> Self {
        Self {
            id: id.into(),
            category: category.into(),
            bbox,
            asset_id: None,
            transform: None,
            ranking: Vec::new(),
            status: PlacementStatus::Placed,
            error: None,
        }
    }

    /// Moves the box and the asset transform together.
    pub fn translate(&mut self, delta: &Vector3<f64>) {
        self.bbox = self.bbox.translated(delta);
        if let Some(t) = self.transform.as_mut() {
            *t = t.with_translation(t.translation() + delta);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<FloorPolygon>,
    #[serde(default)]
    pub floor_z: f64,
    pub objects: Vec<SceneObject>,
}

impl SceneLayout {
    pub fn new(scene_id: impl Into<String>, objects: Vec<SceneObject>) -> Self {
        Self {
            scene_id: scene_id.into(),
            floor: None,
            floor_z: 0.0,
            objects,
        }
    }

    pub fn with_floor(mut self, floor: FloorPolygon) -> Self {
        self.floor = Some(floor);
        self
    }

    pub fn boxes(&self) -> Vec<Aabb> {
        self.objects.iter().map(|o| o.bbox).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn object(&self, id: &str) -> Result<&SceneObject> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::NotFound(format!("object '{id}' in scene '{}'", self.scene_id)))
    }
}

/// The large piece of furniture anchoring a micro-scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeObject {
    pub id: String,
    pub category: String,
    pub bbox: Aabb,
    /// Top-surface outline; absent when the footprint has no area.
    pub top_surface: Option<FloorPolygon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallObject {
    pub id: String,
    pub category: String,
    pub bbox: Aabb,
}

/// One large object plus the small objects resting on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroScene {
    pub large_object: LargeObject,
    pub small_objects: Vec<SmallObject>,
}

impl MicroScene {
    pub fn object_count(&self) -> usize {
        1 + self.small_objects.len()
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Point3;

    use super::*;

    #[test]
    fn translate_moves_box_and_transform() {
        let mut o = SceneObject::new("a", "table", Aabb::unit());
        o.transform = Some(PoseTransform::identity());
        o.translate(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(o.bbox.min, Point3::new(1.0, 0.0, 0.0));
        assert_eq!(o.transform.unwrap().translation(), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_object_is_not_found() {
        let s = SceneLayout::new("s", vec![SceneObject::new("a", "x", Aabb::unit())]);
        assert!(s.object("a").is_ok());
        assert!(matches!(s.object("b"), Err(Error::NotFound(_))));
    }
}
