use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{KdTree, PointCloud};
use crate::error::{Error, Result};

/// Neighborhood size used by the metrics when no other value is configured.
pub const DEFAULT_CURVATURE_NEIGHBORS: usize = 16;

/// Surface variation `λ_min / (λ1 + λ2 + λ3)` of each point's neighborhood
/// (the point plus its `k` nearest others). Values lie in `[0, 1/3]`.
pub fn estimate_curvature(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    if k < 3 {
        return Err(Error::Precondition(format!("curvature needs k >= 3, got {k}")));
    }
    if cloud.len() < k + 1 {
        return Err(Error::Precondition(format!(
            "curvature with k = {k} needs at least {} points, got {}",
            k + 1,
            cloud.len()
        )));
    }
    let points = cloud.points();
    let tree = KdTree::build(points);
    Ok(points
        .iter()
        .map(|p| {
            let hood = tree.k_nearest(p, k + 1);
            let n = hood.len() as f64;
            let mean = hood
                .iter()
                .fold(Vector3::zeros(), |acc, &(i, _)| acc + points[i].coords)
                / n;
            let cov = hood.iter().fold(Matrix3::zeros(), |acc, &(i, _)| {
                let d = points[i].coords - mean;
                acc + d * d.transpose()
            }) / n;
            surface_variation(&cov)
        })
        .collect())
}

fn surface_variation(cov: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(*cov).eigenvalues;
    let vals = eig.map(|v| v.max(0.0));
    let total = vals.sum();
    if total <= 0.0 {
        return 0.0;
    }
    (vals.min() / total).clamp(0.0, 1.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn plane(n: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = (0..n)
            .map(|_| {
                let u: f64 = rng.gen_range(-1.0..1.0);
                let v: f64 = rng.gen_range(-1.0..1.0);
                // tilted plane z = 0.3 x - 0.2 y
                Point3::new(u, v, 0.3 * u - 0.2 * v)
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    fn sphere(n: usize) -> PointCloud {
        let golden = PI * (3.0 - 5f64.sqrt());
        let pts = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let th = golden * i as f64;
                Point3::new(r * th.cos(), r * th.sin(), z)
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn planar_samples_have_no_variation() {
        let c = estimate_curvature(&plane(200), 16).unwrap();
        assert!(
            c.iter().all(|&v| v < 1e-6),
            "max {:?}",
            c.iter().cloned().fold(0.0, f64::max)
        );
    }

    #[test]
    fn sphere_is_more_curved_than_plane() {
        let flat_max = estimate_curvature(&plane(400), 16)
            .unwrap()
            .into_iter()
            .fold(0.0, f64::max);
        let round = estimate_curvature(&sphere(400), 16).unwrap();
        assert!(round.iter().all(|&v| v > flat_max));
        assert!(round.iter().all(|&v| (0.0..=1.0 / 3.0).contains(&v)));
    }

    #[test]
    fn minimal_coplanar_neighborhood() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]).unwrap();
        let k = estimate_curvature(&c, 3).unwrap();
        assert!(k.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn too_few_points() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(estimate_curvature(&c, 3).is_err());
        assert!(estimate_curvature(&plane(10), 2).is_err());
    }
}
