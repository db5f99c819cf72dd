use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in meters. `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAabb")]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

#[derive(Deserialize)]
struct RawAabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl TryFrom<RawAabb> for Aabb {
    type Error = Error;

    fn try_from(raw: RawAabb) -> Result<Self> {
        Aabb::new(raw.min, raw.max)
    }
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Result<Self> {
        if !(min.iter().chain(max.iter()).all(|v| v.is_finite())) {
            return Err(Error::InvalidInput("box corners must be finite".into()));
        }
        if (0..3).any(|i| min[i] > max[i]) {
            return Err(Error::InvalidInput(format!(
                "box min {:?} exceeds max {:?}",
                min.coords.as_slice(),
                max.coords.as_slice()
            )));
        }
        Ok(Self { min, max })
    }

    /// Box from `min` corner and non-negative size.
    pub fn from_min_size(min: Point3<f64>, size: Vector3<f64>) -> Result<Self> {
        Self::new(min, min + size)
    }

    pub fn unit() -> Self {
        Self {
            min: Point3::origin(),
            max: Point3::new(1.0, 1.0, 1.0),
        }
    }

    /// Tight box around a non-empty point set.
    pub fn from_points<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Point3<f64>>,
    {
        let mut iter = points.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Precondition("bounding box of an empty point set".into()))?;
        let (mut min, mut max) = (*first, *first);
        for p in iter {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Self::new(min, max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn longest_side(&self) -> f64 {
        self.extent().max()
    }

    pub fn translated(&self, delta: &Vector3<f64>) -> Self {
        Self {
            min: self.min + delta,
            max: self.max + delta,
        }
    }

    /// Smallest box enclosing both.
    pub fn merge(&self, other: &Aabb) -> Self {
        Self {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Overlap region; `None` when the boxes are separated along some axis.
    /// Touching boxes yield a zero-volume intersection.
    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        if (0..3).any(|i| min[i] > max[i]) {
            None
        } else {
            Some(Aabb { min, max })
        }
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            let lo = self.min[i].max(other.min[i]);
            let hi = self.max[i].min(other.max[i]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    /// Box grown by `margin` on every side.
    pub fn inflated(&self, margin: f64) -> Self {
        let m = Vector3::repeat(margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn footprint(&self) -> Footprint {
        Footprint {
            min: Point2::new(self.min.x, self.min.y),
            max: Point2::new(self.max.x, self.max.y),
        }
    }

    pub fn contains_point(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Ground-plane rectangle of a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub min: Point2<f64>,
    pub max: Point2<f64>,
}

impl Footprint {
    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn center(&self) -> Point2<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    /// Counterclockwise corners starting at `min`.
    pub fn corners(&self) -> [Point2<f64>; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    pub fn overlap_area(&self, other: &Footprint) -> f64 {
        let w = self.max.x.min(other.max.x) - self.min.x.max(other.min.x);
        let h = self.max.y.min(other.max.y) - self.min.y.max(other.min.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }
}
