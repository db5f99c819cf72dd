use nalgebra::{Point3, Vector3};

use super::{Aabb, PoseTransform};
use crate::error::{Error, Result};

/// RGB in `[0, 1]` per channel.
pub type Color = [f64; 3];

/// Point set in meters with optional per-point colors. Up axis is +z.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    colors: Option<Vec<Color>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "non-finite point {:?}",
                p.coords.as_slice()
            )));
        }
        Ok(Self { points, colors: None })
    }

    pub fn with_colors(points: Vec<Point3<f64>>, colors: Vec<Color>) -> Result<Self> {
        if colors.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidInput("color channel outside [0, 1]".into()));
        }
        let mut cloud = Self::new(points)?;
        cloud.colors = Some(colors);
        Ok(cloud)
    }

    pub fn from_xyz(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Point3::from(*p)).collect())
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[Color]> {
        self.colors.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            Err(Error::Precondition(format!("{what} point cloud is empty")))
        } else {
            Ok(())
        }
    }

    pub fn centroid(&self) -> Result<Point3<f64>> {
        self.require_non_empty("centroid of")?;
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Ok(Point3::from(sum / self.points.len() as f64))
    }

    pub fn aabb(&self) -> Result<Aabb> {
        Aabb::from_points(&self.points)
    }

    pub fn transformed(&self, t: &PoseTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            colors: self.colors.clone(),
        }
    }

    /// Maps every point through `f`, keeping colors.
    pub fn map_points(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            points: self.points.iter().map(f).collect(),
            colors: self.colors.clone(),
        }
    }

    /// Subset by index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Farthest-point downsample to at most `budget` points, seeded at index 0.
    pub fn downsample(&self, budget: usize) -> Self {
        if self.len() <= budget {
            return self.clone();
        }
        self.select(&farthest_point_indices(&self.points, budget))
    }
}

/// Greedy farthest-point sampling. Ties resolve to the lowest index, so the
/// result is deterministic and equivariant under similarity transforms.
pub fn farthest_point_indices(points: &[Point3<f64>], count: usize) -> Vec<usize> {
    let count = count.min(points.len());
    if count == 0 {
        return Vec::new();
    }
    let mut chosen = Vec::with_capacity(count);
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut current = 0usize;
    chosen.push(current);
    while chosen.len() < count {
        let anchor = points[current];
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, p) in points.iter().enumerate() {
            let d = (p - anchor).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > best.0 {
                best = (dist[i], i);
            }
        }
        current = best.1;
        chosen.push(current);
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_validated() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(PointCloud::with_colors(pts.clone(), vec![[0.0; 3]]).is_err());
        assert!(PointCloud::with_colors(pts.clone(), vec![[0.0; 3], [1.5, 0.0, 0.0]]).is_err());
        assert!(PointCloud::with_colors(pts, vec![[0.0; 3], [1.0; 3]]).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PointCloud::from_xyz(&[[0.0, f64::INFINITY, 0.0]]).is_err());
    }

    #[test]
    fn fps_spreads_out() {
        let cloud =
            PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [10.0, 0.0, 0.0], [5.0, 0.0, 0.0]]).unwrap();
        let idx = farthest_point_indices(cloud.points(), 3);
        assert_eq!(idx, vec![0, 2, 3]);
        assert_eq!(cloud.downsample(10).len(), 4);
    }

    #[test]
    fn centroid_of_empty_is_error() {
        assert!(PointCloud::default().centroid().is_err());
    }
}
