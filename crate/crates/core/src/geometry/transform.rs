use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Similarity transform restricted to uniform scale and rotation about +z.
///
/// A point maps as `p -> R_yaw(scale * p) + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseTransform {
    translation: Vector3<f64>,
    scale: f64,
    yaw: f64,
}

impl PoseTransform {
    pub fn new(translation: Vector3<f64>, scale: f64, yaw: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        if !yaw.is_finite() || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("transform must be finite".into()));
        }
        Ok(Self {
            translation,
            scale,
            yaw: normalize_yaw(yaw),
        })
    }

    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            scale: 1.0,
            yaw: 0.0,
        }
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Radians in `[0, 2π)`.
    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn yaw_degrees(&self) -> f64 {
        self.yaw.to_degrees()
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        let (s, c) = self.yaw.sin_cos();
        let x = self.scale * p.x;
        let y = self.scale * p.y;
        Point3::new(
            c * x - s * y + self.translation.x,
            s * x + c * y + self.translation.y,
            self.scale * p.z + self.translation.z,
        )
    }

    pub fn apply_inverse(&self, q: &Point3<f64>) -> Point3<f64> {
        let (s, c) = self.yaw.sin_cos();
        let d = q - self.translation;
        Point3::new(
            (c * d.x + s * d.y) / self.scale,
            (-s * d.x + c * d.y) / self.scale,
            d.z / self.scale,
        )
    }

    pub fn inverse(&self) -> Self {
        let inv_rot_t = rotate_z(&(-self.translation), -self.yaw) / self.scale;
        Self {
            translation: inv_rot_t,
            scale: 1.0 / self.scale,
            yaw: normalize_yaw(-self.yaw),
        }
    }
}

/// Rotates a vector about +z.
pub fn rotate_z(v: &Vector3<f64>, yaw: f64) -> Vector3<f64> {
    let (s, c) = yaw.sin_cos();
    Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

#[derive(Serialize, Deserialize)]
struct WireTransform {
    translation: [f64; 3],
    scale: f64,
    yaw_degrees: f64,
}

impl Serialize for PoseTransform {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        WireTransform {
            translation: [self.translation.x, self.translation.y, self.translation.z],
            scale: self.scale,
            yaw_degrees: self.yaw_degrees(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PoseTransform {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let w = WireTransform::deserialize(deserializer)?;
        PoseTransform::new(Vector3::from(w.translation), w.scale, w.yaw_degrees.to_radians())
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn composition_order_is_scale_rotate_translate() {
        let t = PoseTransform::new(Vector3::new(1.0, 0.0, 0.0), 2.0, 0.0).unwrap();
        let q = t.apply(&Point3::new(1.0, 1.0, 0.0));
        assert_eq!(q, Point3::new(3.0, 2.0, 0.0));

        let half = PoseTransform::new(Vector3::zeros(), 1.0, PI).unwrap();
        let q = half.apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((q - Point3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn yaw_is_normalized() {
        let t = PoseTransform::new(Vector3::zeros(), 1.0, -PI / 2.0).unwrap();
        assert!((t.yaw() - 1.5 * PI).abs() < 1e-12);
        let t = PoseTransform::new(Vector3::zeros(), 1.0, 4.0 * PI).unwrap();
        assert_eq!(t.yaw(), 0.0);
        let t = PoseTransform::new(Vector3::zeros(), 1.0, -1e-18).unwrap();
        assert!(t.yaw() < TAU);
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(PoseTransform::new(Vector3::zeros(), 0.0, 0.0).is_err());
        assert!(PoseTransform::new(Vector3::zeros(), -1.0, 0.0).is_err());
    }

    #[test]
    fn inverse_transform_composes_to_identity() {
        let t = PoseTransform::new(Vector3::new(0.3, -2.0, 1.0), 1.7, 2.2).unwrap();
        let p = Point3::new(0.5, 0.25, -1.5);
        let back = t.inverse().apply(&t.apply(&p));
        assert!((back - p).norm() < 1e-12);
    }

    #[test]
    fn serializes_yaw_in_degrees() {
        let t = PoseTransform::new(Vector3::new(1.0, 2.0, 3.0), 2.0, PI / 2.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(t).unwrap();
        assert_eq!(v["scale"], 2.0);
        assert!((v["yaw_degrees"].as_f64().unwrap() - 90.0).abs() < 1e-12);
        let back: PoseTransform = serde_json::from_value(v).unwrap();
        assert!((back.yaw() - t.yaw()).abs() < 1e-15);
    }
}
