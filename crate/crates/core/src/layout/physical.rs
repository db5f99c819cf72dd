use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicsCategory {
    #[serde(alias = "Rigid Body", alias = "rigid body")]
    RigidBody,
    #[serde(alias = "Cloth")]
    Cloth,
    #[serde(alias = "Soft Body", alias = "soft body")]
    SoftBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalAttributes {
    pub category: PhysicsCategory,
    /// Kilograms.
    pub mass: f64,
    pub friction: f64,
    pub bounciness: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeClass {
    Small,
    Medium,
    Large,
}

pub const SMALL_VOLUME_M3: f64 = 0.05;
pub const MEDIUM_VOLUME_M3: f64 = 1.0;
pub const MAX_FRICTION: f64 = 1.5;

impl VolumeClass {
    pub fn of(bbox: &Aabb) -> Self {
        let v = bbox.volume();
        if v < SMALL_VOLUME_M3 {
            VolumeClass::Small
        } else if v < MEDIUM_VOLUME_M3 {
            VolumeClass::Medium
        } else {
            VolumeClass::Large
        }
    }

    pub fn mass_ok(self, mass: f64) -> bool {
        match self {
            VolumeClass::Small => (0.1..=5.0).contains(&mass),
            VolumeClass::Medium => (5.0..=50.0).contains(&mass),
            VolumeClass::Large => mass > 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeViolation {
    pub field: String,
    pub message: String,
}

pub fn validate_physical_attributes(attrs: &PhysicalAttributes, bbox: &Aabb) -> Vec<AttributeViolation> {
    let mut out = Vec::new();
    let mut flag = |field: &str, message: String| {
        out.push(AttributeViolation {
            field: field.into(),
            message,
        })
    };
    let class = VolumeClass::of(bbox);
    if !(attrs.mass.is_finite() && attrs.mass > 0.0) {
        flag("mass", format!("mass must be positive, got {}", attrs.mass));
    } else if !class.mass_ok(attrs.mass) {
        flag(
            "mass",
            format!(
                "{} kg is outside the {class:?} band for {:.3} m³",
                attrs.mass,
                bbox.volume()
            ),
        );
    }
    if !(0.0..=MAX_FRICTION).contains(&attrs.friction) {
        flag(
            "friction",
            format!("friction {} outside [0, {MAX_FRICTION}]", attrs.friction),
        );
    }
    if attrs.bounciness != 0 && attrs.bounciness != 1 {
        flag(
            "bounciness",
            format!("bounciness must be 0 or 1, got {}", attrs.bounciness),
        );
    }
    out
}
