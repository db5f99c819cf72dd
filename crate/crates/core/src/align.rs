//! Places a retrieved asset into the scan frame: centroid translation,
//! longest-side uniform scale, and a discrete yaw search about +z.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotate_z, Aabb, PointCloud, PoseTransform};
use crate::metrics::{chamfer_distance, normalize_pair};

/// Costs closer than this are treated as equal; the smaller yaw wins.
pub const YAW_TIE_TOLERANCE: f64 = 1e-6;
/// Clouds are downsampled to this many points before the cost is evaluated.
pub const ALIGN_POINT_BUDGET: usize = 2048;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignCost {
    /// Normalized symmetric chamfer distance.
    #[default]
    Chamfer,
    /// L1 difference of bounding-box extents over the scan diagonal.
    BoxExtent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub yaw_step_degrees: f64,
    pub cost: AlignCost,
    pub point_budget: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            yaw_step_degrees: 30.0,
            cost: AlignCost::Chamfer,
            point_budget: ALIGN_POINT_BUDGET,
        }
    }
}

impl AlignConfig {
    /// Yaw candidates in degrees, ascending from 0.
    pub fn yaw_candidates(&self) -> Result<Vec<f64>> {
        let step = self.yaw_step_degrees;
        let count = 360.0 / step;
        if !(step > 0.0 && step <= 360.0) || (count - count.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("yaw step {step}° must evenly divide 360°")));
        }
        Ok((0..count.round() as usize).map(|i| i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub transform: PoseTransform,
    /// Cost of each candidate yaw, in ascending yaw order.
    pub yaw_costs: Vec<f64>,
    pub chosen_yaw_index: usize,
    /// Minimum over `yaw_costs`.
    pub alignment_cost: f64,
}

/// Aligns with the default 30° search and chamfer cost.
pub fn align_pose(asset: &PointCloud, scan: &PointCloud) -> Result<AlignmentResult> {
    align_pose_with(asset, scan, &AlignConfig::default())
}

pub fn align_pose_with(asset: &PointCloud, scan: &PointCloud, cfg: &AlignConfig) -> Result<AlignmentResult> {
    asset.require_non_empty("asset")?;
    scan.require_non_empty("scan")?;
    let yaws = cfg.yaw_candidates()?;
    if asset.aabb()?.longest_side() <= 0.0 {
        return Err(Error::Degenerate("asset bounding box has zero extent".into()));
    }
    let scan_box = scan.aabb()?;
    if scan_box.longest_side() <= 0.0 {
        return Err(Error::Degenerate("scan bounding box has zero extent".into()));
    }
    let asset_c = asset.centroid()?;
    let scan_c = scan.centroid()?;
    let asset_ds = asset.downsample(cfg.point_budget);
    let scan_ds = scan.downsample(cfg.point_budget);

    let evaluated: Vec<(PoseTransform, f64)> = yaws
        .par_iter()
        .map(|&deg| {
            let yaw = deg.to_radians();
            let scale = scan_box.longest_side() / rotated_box(asset, yaw)?.longest_side();
            let translation = scan_c.coords - rotate_z(&(asset_c.coords * scale), yaw);
            let t = PoseTransform::new(translation, scale, yaw)?;
            let cost = match cfg.cost {
                AlignCost::Chamfer => {
                    let (a, b) = normalize_pair(&asset_ds.transformed(&t), &scan_ds)?;
                    chamfer_distance(&a, &b)?
                }
                AlignCost::BoxExtent => box_extent_cost(&asset.transformed(&t).aabb()?, &scan_box),
            };
            Ok((t, cost))
        })
        .collect::<Result<_>>()?;

    let yaw_costs: Vec<f64> = evaluated.iter().map(|(_, c)| *c).collect();
    let min = yaw_costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let chosen = yaw_costs
        .iter()
        .position(|&c| c <= min + YAW_TIE_TOLERANCE)
        .expect("at least one yaw candidate");
    Ok(AlignmentResult {
        transform: evaluated[chosen].0,
        yaw_costs,
        chosen_yaw_index: chosen,
        alignment_cost: min,
    })
}

/// Normalized chamfer distance between the asset rotated by `yaw` about its
/// own centroid and the scan. The asset is expected to be centered on the
/// scan and scaled already.
pub fn yaw_cost(asset: &PointCloud, scan: &PointCloud, yaw: f64) -> Result<f64> {
    let c = asset.centroid()?;
    let rotated = asset.map_points(|p| c + rotate_z(&(p - c), yaw));
    let (a, b) = normalize_pair(
        &rotated.downsample(ALIGN_POINT_BUDGET),
        &scan.downsample(ALIGN_POINT_BUDGET),
    )?;
    chamfer_distance(&a, &b)
}

fn rotated_box(cloud: &PointCloud, yaw: f64) -> Result<Aabb> {
    let (s, c) = yaw.sin_cos();
    let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = -min;
    for p in cloud.points() {
        let q = Vector3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z);
        for k in 0..3 {
            min[k] = min[k].min(q[k]);
            max[k] = max[k].max(q[k]);
        }
    }
    Aabb::new(min, max)
}

fn box_extent_cost(a: &Aabb, scan: &Aabb) -> f64 {
    (a.extent() - scan.extent()).abs().sum() / scan.diagonal()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// An asymmetric L-shaped blob: no yaw symmetry.
    fn asymmetric_asset(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        let pts = (0..n)
            .map(|i| match i % 3 {
                0 => Point3::new(
                    rng.gen_range(0.0..1.2),
                    rng.gen_range(0.0..0.3),
                    rng.gen_range(0.0..0.8),
                ),
                1 => Point3::new(
                    rng.gen_range(0.0..0.3),
                    rng.gen_range(0.0..0.7),
                    rng.gen_range(0.0..0.8),
                ),
                _ => Point3::new(
                    rng.gen_range(0.9..1.2),
                    rng.gen_range(0.3..0.4),
                    rng.gen_range(0.0..0.2),
                ),
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn identity_fixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = asymmetric_asset(&mut rng, 300);
        let r = align_pose(&a, &a).unwrap();
        assert_eq!(r.chosen_yaw_index, 0);
        assert!((r.transform.scale() - 1.0).abs() < 1e-12);
        assert!(r.alignment_cost < 1e-12);
        assert_eq!(r.yaw_costs.len(), 12);
    }

    #[test]
    fn recovers_rotation_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = asymmetric_asset(&mut rng, 400);
        let truth = PoseTransform::new(Vector3::new(1.0, 2.0, 0.0), 1.0, 60f64.to_radians()).unwrap();
        let scan = a.transformed(&truth);
        let r = align_pose(&a, &scan).unwrap();
        assert_eq!(r.chosen_yaw_index, 2);
        assert!((r.transform.yaw_degrees() - 60.0).abs() < 1e-9);
        assert!((r.transform.translation() - truth.translation()).norm() < 1e-6);
        assert!((r.transform.scale() - 1.0).abs() < 1e-6);
        // exhaustive check: the chosen entry is the argmin of the table
        let argmin = (0..12)
            .min_by(|&i, &j| r.yaw_costs[i].total_cmp(&r.yaw_costs[j]))
            .unwrap();
        assert_eq!(argmin, 2);
        assert!(r.yaw_costs.iter().all(|&c| r.alignment_cost <= c));
    }

    #[test]
    fn recovers_uniform_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = asymmetric_asset(&mut rng, 200);
        let scan = a.transformed(&PoseTransform::new(Vector3::new(0.0, 0.0, 0.0), 2.0, 0.0).unwrap());
        let r = align_pose(&a, &scan).unwrap();
        assert!((r.transform.scale() - 2.0).abs() < 1e-6);
        assert_eq!(r.chosen_yaw_index, 0);
    }

    #[test]
    fn symmetric_cylinder_prefers_zero_yaw() {
        let mut pts = Vec::new();
        for ring in 0..5 {
            for k in 0..48 {
                let th = k as f64 * TAU / 48.0;
                pts.push(Point3::new(th.cos(), th.sin(), ring as f64 * 0.25));
            }
        }
        let cyl = PointCloud::new(pts).unwrap();
        let shifted = cyl.transformed(&PoseTransform::new(Vector3::new(3.0, 0.0, 0.0), 1.0, 0.0).unwrap());
        let r = align_pose(&cyl, &shifted).unwrap();
        let (lo, hi) = r
            .yaw_costs
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &c| (l.min(c), h.max(c)));
        assert!(hi - lo < 1e-6);
        assert_eq!(r.chosen_yaw_index, 0);
    }

    #[test]
    fn yaw_cost_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = asymmetric_asset(&mut rng, 150);
        let c = a.centroid().unwrap();
        let scan = a.map_points(|p| c + rotate_z(&(p - c), PI / 2.0));
        let costs: Vec<f64> = (0..12)
            .map(|i| yaw_cost(&a, &scan, (i as f64 * 30.0).to_radians()).unwrap())
            .collect();
        let argmin = (0..12).min_by(|&i, &j| costs[i].total_cmp(&costs[j])).unwrap();
        assert_eq!(argmin, 3);
        let y = 0.7;
        assert!((yaw_cost(&a, &scan, y).unwrap() - yaw_cost(&a, &scan, y + TAU).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let p = PointCloud::from_xyz(&[[1.0, 1.0, 1.0]]).unwrap();
        let q = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(align_pose(&p, &q), Err(Error::Degenerate(_))));
        assert!(align_pose(&PointCloud::default(), &q).is_err());
        let bad = AlignConfig {
            yaw_step_degrees: 7.0,
            ..Default::default()
        };
        assert!(align_pose_with(&q, &q, &bad).is_err());
    }

    #[test]
    fn box_fallback_and_finer_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = asymmetric_asset(&mut rng, 200);
        let scan = a.transformed(&PoseTransform::new(Vector3::new(0.5, 0.0, 0.0), 1.5, 0.0).unwrap());
        let cfg = AlignConfig {
            cost: AlignCost::BoxExtent,
            ..Default::default()
        };
        let r = align_pose_with(&a, &scan, &cfg).unwrap();
        assert_eq!(r.chosen_yaw_index, 0);
        assert!(r.alignment_cost < 1e-12);
        let fine = AlignConfig {
            yaw_step_degrees: 15.0,
            ..Default::default()
        };
        assert_eq!(align_pose_with(&a, &scan, &fine).unwrap().yaw_costs.len(), 24);
    }

    #[test]
    fn serialized_result_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = asymmetric_asset(&mut rng, 250);
        let scan = a.transformed(&PoseTransform::new(Vector3::new(-1.0, 0.3, 0.1), 0.8, 150f64.to_radians()).unwrap());
        let x = serde_json::to_string(&align_pose(&a, &scan).unwrap()).unwrap();
        let y = serde_json::to_string(&align_pose(&a, &scan).unwrap()).unwrap();
        assert_eq!(x, y);
        assert!(x.contains("yaw_degrees"));
    }
}
