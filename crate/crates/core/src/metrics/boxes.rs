use crate::error::{Error, Result};
use crate::geometry::Aabb;

/// Pairs with IoU above this count as colliding.
pub const COLLISION_IOU_EPS: f64 = 1e-6;

/// Intersection volume over union volume.
pub fn bbox_iou(a: &Aabb, b: &Aabb) -> Result<f64> {
    let inter = a.intersection_volume(b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return Err(Error::Degenerate("boxes have zero union volume".into()));
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// IoU that treats a zero-volume union as no overlap.
pub(crate) fn iou_or_zero(a: &Aabb, b: &Aabb) -> f64 {
    bbox_iou(a, b).unwrap_or(0.0)
}

/// Absolute volume difference in m³.
pub fn size_error(aligned: &Aabb, real: &Aabb) -> f64 {
    (aligned.volume() - real.volume()).abs()
}

/// Difference of scene-level bounding-box diagonals, in meters.
pub fn scale_error(scene_a: &[Aabb], scene_b: &[Aabb]) -> Result<f64> {
    let diag = |boxes: &[Aabb]| -> Result<f64> {
        let (first, rest) = boxes
            .split_first()
            .ok_or_else(|| Error::Precondition("scale error of an empty scene".into()))?;
        Ok(rest.iter().fold(*first, |acc, b| acc.merge(b)).diagonal())
    };
    Ok((diag(scene_a)? - diag(scene_b)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CollisionRates {
    /// Fraction of objects overlapping at least one other.
    pub col_obj: f64,
    /// 1 when any pair overlaps.
    pub col_scene: f64,
}

pub fn collision_rates(boxes: &[Aabb]) -> CollisionRates {
    let n = boxes.len();
    let mut hit = vec![false; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if iou_or_zero(&boxes[i], &boxes[j]) > COLLISION_IOU_EPS {
                hit[i] = true;
                hit[j] = true;
            }
        }
    }
    let colliding = hit.iter().filter(|&&h| h).count();
    CollisionRates {
        col_obj: if n == 0 { 0.0 } else { colliding as f64 / n as f64 },
        col_scene: if colliding > 0 { 1.0 } else { 0.0 },
    }
}
