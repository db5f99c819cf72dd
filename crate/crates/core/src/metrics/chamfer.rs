use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::{estimate_curvature, nearest_distances_raw, PointCloud, DEFAULT_CURVATURE_NEIGHBORS};

/// Clouds are farthest-point downsampled to this many points before metrics.
pub const METRIC_POINT_BUDGET: usize = 4096;

/// Symmetric mean nearest-neighbor distance:
/// `½ (mean_a d(a, B) + mean_b d(b, A))`.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    a.require_non_empty("first")?;
    b.require_non_empty("second")?;
    let ab = mean(&nearest_distances_raw(a.points(), b.points()));
    let ba = mean(&nearest_distances_raw(b.points(), a.points()));
    Ok(0.5 * (ab + ba))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcdOptions {
    /// Neighborhood size for the curvature estimate.
    pub neighbors: usize,
    /// When false every weight is 1 and the result equals the plain CD.
    pub curvature_weighting: bool,
}

impl Default for EcdOptions {
    fn default() -> Self {
        Self {
            neighbors: DEFAULT_CURVATURE_NEIGHBORS,
            curvature_weighting: true,
        }
    }
}

/// Curvature-weighted chamfer distance. Each point's nearest distance is
/// scaled by `1 + κ / κ_max` of its own cloud, so the value never drops
/// below the plain chamfer distance.
pub fn enhanced_chamfer_distance(a: &PointCloud, b: &PointCloud, opts: EcdOptions) -> Result<f64> {
    a.require_non_empty("first")?;
    b.require_non_empty("second")?;
    let da = nearest_distances_raw(a.points(), b.points());
    let db = nearest_distances_raw(b.points(), a.points());
    let (wa, wb) = if opts.curvature_weighting {
        (
            curvature_weights(a, opts.neighbors)?,
            curvature_weights(b, opts.neighbors)?,
        )
    } else {
        (vec![1.0; a.len()], vec![1.0; b.len()])
    };
    let weighted = |d: &[f64], w: &[f64]| mean(&d.iter().zip(w).map(|(d, w)| d * w).collect::<Vec<_>>());
    Ok(0.5 * (weighted(&da, &wa) + weighted(&db, &wb)))
}

/// Curvature below this is numerical noise on a flat surface.
const FLAT_CURVATURE: f64 = 1e-9;

/// `1 + κ/κ_max` per point. Clouds too small for a 3-neighbor estimate, or
/// flat everywhere, get uniform weight 1.
fn curvature_weights(cloud: &PointCloud, neighbors: usize) -> Result<Vec<f64>> {
    let k = neighbors.min(cloud.len().saturating_sub(1));
    if k < 3 {
        return Ok(vec![1.0; cloud.len()]);
    }
    let kappa = estimate_curvature(cloud, k)?;
    let max = kappa.iter().cloned().fold(0.0, f64::max);
    if max <= FLAT_CURVATURE {
        return Ok(vec![1.0; cloud.len()]);
    }
    Ok(kappa.into_iter().map(|k| 1.0 + k / max).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Expresses both clouds in the reference's frame: origin at the reference
/// centroid, unit bounding-box diagonal.
pub fn normalize_pair(cloud: &PointCloud, reference: &PointCloud) -> Result<(PointCloud, PointCloud)> {
    let c = reference.centroid()?;
    let diag = reference.aabb()?.diagonal();
    if diag <= 0.0 {
        return Err(Error::Degenerate(
            "reference cloud has zero extent; cannot normalize".into(),
        ));
    }
    let f = |p: &Point3<f64>| Point3::from((p - c) / diag);
    Ok((cloud.map_points(f), reference.map_points(f)))
}

/// Chamfer distance in the reference frame after downsampling both clouds
/// to the metric point budget.
pub fn normalized_chamfer(cloud: &PointCloud, reference: &PointCloud) -> Result<f64> {
    normalized_chamfer_with_budget(cloud, reference, METRIC_POINT_BUDGET)
}

pub fn normalized_chamfer_with_budget(cloud: &PointCloud, reference: &PointCloud, budget: usize) -> Result<f64> {
    let (a, b) = normalize_pair(&cloud.downsample(budget), &reference.downsample(budget))?;
    chamfer_distance(&a, &b)
}

pub fn normalized_enhanced_chamfer(cloud: &PointCloud, reference: &PointCloud, opts: EcdOptions) -> Result<f64> {
    let (a, b) = normalize_pair(
        &cloud.downsample(METRIC_POINT_BUDGET),
        &reference.downsample(METRIC_POINT_BUDGET),
    )?;
    enhanced_chamfer_distance(&a, &b, opts)
}
