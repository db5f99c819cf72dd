//! Seeded synthetic scene bundles with known ground truth, for demos and
//! tests. Every scan is a candidate asset moved by a known pose, so the
//! correct answers for matching and alignment are available exactly.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{
    write_atomic, write_sorted_json, CandidateRef, EmbeddingRef, Manifest, ManifestObject, QueryRefs, UpAxis,
};
use crate::category::CategoryMap;
use crate::error::{Error, Result};
use crate::geometry::{ply, Aabb, PointCloud, PoseTransform};
use crate::matching::{EmbeddingMatrix, PointScorerWeights};

/// A 1x1 grey PNG, standing in for the object photo.
pub const PLACEHOLDER_PNG: [u8; 69] = [
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00,
    0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00, 0x0c, 0x49,
    0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x68, 0x68, 0x68, 0x00, 0x00, 0x03, 0x04, 0x01, 0x81, 0x4b, 0xd3, 0xd2, 0x10,
    0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub scene_id: String,
    /// Floor-standing objects, laid out on a grid.
    pub objects: usize,
    /// Extra small objects resting on the first floor object.
    pub supported: usize,
    pub candidates: usize,
    pub dim: usize,
    pub points_per_asset: usize,
    /// Std-dev of the noise added to the truth embedding to form the query.
    pub query_noise: f64,
    /// Use the scan cloud itself as the correct candidate.
    pub oracle: bool,
    pub with_scorer: bool,
    pub up_axis: UpAxis,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scene_id: "synth".into(),
            objects: 4,
            supported: 0,
            candidates: 10,
            dim: 16,
            points_per_asset: 400,
            query_noise: 0.05,
            oracle: false,
            with_scorer: false,
            up_axis: UpAxis::Z,
            seed: 0,
        }
    }
}

/// Where each scan came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub object_id: String,
    pub asset_id: String,
    pub truth_index: usize,
    /// Maps the truth asset cloud onto the scan.
    pub transform: PoseTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBundle {
    pub manifest: Manifest,
    pub truths: Vec<SynthTruth>,
}

/// Cell pitch of the floor grid, in meters.
const GRID_PITCH: f64 = 3.0;

/// Surface samples of a random union of two or three boxes. The parts are
/// offset from each other so the shape has no rotational symmetry about z in
/// general. The shape sits on z = 0.
pub fn random_asset(rng: &mut ChaCha8Rng, n: usize) -> Result<PointCloud> {
    let parts = rng.gen_range(2..=3);
    let mut boxes = Vec::with_capacity(parts);
    let base = Vector3::new(
        rng.gen_range(0.4..1.0),
        rng.gen_range(0.3..0.7),
        rng.gen_range(0.2..0.6),
    );
    boxes.push(Aabb::from_min_size(
        Point3::new(-base.x / 2.0, -base.y / 2.0, 0.0),
        base,
    )?);
    for _ in 1..parts {
        let size = Vector3::new(
            rng.gen_range(0.1..0.4),
            rng.gen_range(0.1..0.3),
            rng.gen_range(0.1..0.6),
        );
        let min = Point3::new(
            rng.gen_range(-base.x / 2.0..base.x / 2.0 - size.x / 2.0),
            rng.gen_range(-base.y / 2.0..base.y / 2.0 - size.y / 2.0),
            base.z,
        );
        boxes.push(Aabb::from_min_size(min, size)?);
    }
    let areas: Vec<f64> = boxes
        .iter()
        .map(|b| {
            let e = b.extent();
            2.0 * (e.x * e.y + e.y * e.z + e.x * e.z)
        })
        .collect();
    let total: f64 = areas.iter().sum();
    let tint: [f64; 3] = [
        rng.gen_range(0.1..0.9),
        rng.gen_range(0.1..0.9),
        rng.gen_range(0.1..0.9),
    ];
    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.gen_range(0.0..total);
        let mut k = 0;
        while k + 1 < boxes.len() && pick >= areas[k] {
            pick -= areas[k];
            k += 1;
        }
        points.push(sample_box_surface(rng, &boxes[k]));
        let j: f64 = rng.gen_range(-0.05..0.05);
        colors.push([
            (tint[0] + j).clamp(0.0, 1.0),
            (tint[1] + j).clamp(0.0, 1.0),
            (tint[2] + j).clamp(0.0, 1.0),
        ]);
    }
    PointCloud::with_colors(points, colors)
}

fn sample_box_surface(rng: &mut ChaCha8Rng, b: &Aabb) -> Point3<f64> {
    let e = b.extent();
    let faces = [e.y * e.z, e.y * e.z, e.x * e.z, e.x * e.z, e.x * e.y, e.x * e.y];
    let mut pick = rng.gen_range(0.0..faces.iter().sum::<f64>());
    let mut face = 0;
    while face < 5 && pick >= faces[face] {
        pick -= faces[face];
        face += 1;
    }
    let mut p = Point3::new(
        b.min.x + rng.gen_range(0.0..=1.0) * e.x,
        b.min.y + rng.gen_range(0.0..=1.0) * e.y,
        b.min.z + rng.gen_range(0.0..=1.0) * e.z,
    );
    let axis = face / 2;
    p[axis] = if face % 2 == 0 { b.min[axis] } else { b.max[axis] };
    p
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn noisy_unit(rng: &mut ChaCha8Rng, base: &[f64], sigma: f64) -> Vec<f64> {
    let v: Vec<f64> = base.iter().map(|x| x + sigma * rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn to_disk(cloud: &PointCloud, up: UpAxis) -> PointCloud {
    match up {
        UpAxis::Z => cloud.clone(),
        UpAxis::Y => cloud.map_points(|p| Point3::new(p.x, p.z, -p.y)),
    }
}

fn write_cloud(dir: &Path, rel: &str, cloud: &PointCloud, up: UpAxis) -> Result<()> {
    write_atomic(&dir.join(rel), &ply::encode_ply(&to_disk(cloud, up)))
}

fn f32_row(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Writes a complete bundle into `dir` and returns its manifest and truths.
pub fn write_synthetic_bundle(dir: &Path, cfg: &SynthConfig) -> Result<SynthBundle> {
    if cfg.candidates < 2 || cfg.dim == 0 || cfg.points_per_asset == 0 {
        return Err(Error::InvalidInput(
            "synthetic bundle needs ≥ 2 candidates, D ≥ 1 and points".into(),
        ));
    }
    if cfg.supported > 0 && cfg.objects == 0 {
        return Err(Error::InvalidInput(
            "supported objects need a floor object to rest on".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let map = CategoryMap::default_map();
    let large: Vec<&String> = map.large.iter().collect();
    let small: Vec<&String> = map.small.difference(&map.large).collect();
    let cols = (cfg.objects as f64).sqrt().ceil().max(1.0) as usize;

    let mut asset_rows = Vec::new();
    let mut asset_ids = Vec::new();
    let mut query_rows = Vec::new();
    let mut query_ids = Vec::new();
    let mut objects = Vec::new();
    let mut truths = Vec::new();
    let mut support_top: Option<Aabb> = None;

    for i in 0..cfg.objects + cfg.supported {
        let on_top = i >= cfg.objects;
        let id = format!("obj{i:03}");
        let category = if on_top {
            small[i % small.len()]
        } else {
            large[i % large.len()]
        };
        let truth_index = rng.gen_range(0..cfg.candidates);
        let yaw = (rng.gen_range(0..12) as f64 * 30.0).to_radians();
        let scale = if on_top {
            rng.gen_range(0.2..0.35)
        } else {
            rng.gen_range(0.6..1.5)
        };

        let mut clouds = Vec::with_capacity(cfg.candidates);
        for _ in 0..cfg.candidates {
            clouds.push(random_asset(&mut rng, cfg.points_per_asset)?);
        }
        let truth_cloud = &clouds[truth_index];

        let rotated = truth_cloud.transformed(&PoseTransform::new(Vector3::zeros(), scale, yaw)?);
        let rb = rotated.aabb()?;
        let anchor = if on_top {
            let top = support_top.ok_or_else(|| Error::Precondition("no supporting object".into()))?;
            let k = i - cfg.objects;
            let fx = (k as f64 + 0.5) / cfg.supported as f64;
            Point3::new(top.min.x + fx * (top.max.x - top.min.x), top.center().y, top.max.z)
        } else {
            let (r, c) = (i / cols, i % cols);
            Point3::new(
                c as f64 * GRID_PITCH + GRID_PITCH / 2.0,
                r as f64 * GRID_PITCH + GRID_PITCH / 2.0,
                0.0,
            )
        };
        let c = rb.center();
        let translation = Vector3::new(anchor.x - c.x, anchor.y - c.y, anchor.z - rb.min.z);
        let transform = PoseTransform::new(translation, scale, yaw)?;
        let scan = truth_cloud.transformed(&transform);
        if i == 0 {
            support_top = Some(scan.aabb()?);
        }

        let scan_rel = format!("clouds/{id}_scan.ply");
        write_cloud(dir, &scan_rel, &scan, cfg.up_axis)?;
        let image_rel = format!("images/{id}.png");
        write_atomic(&dir.join(&image_rel), &PLACEHOLDER_PNG)?;

        let mut candidates = Vec::with_capacity(cfg.candidates);
        let mut truth_embedding = Vec::new();
        for (k, cloud) in clouds.iter().enumerate() {
            let asset_id = format!("{id}_a{k}");
            let rel = format!("clouds/{asset_id}.ply");
            let (cloud, transform_k) = if cfg.oracle && k == truth_index {
                (&scan, PoseTransform::identity())
            } else {
                (cloud, transform)
            };
            write_cloud(dir, &rel, cloud, cfg.up_axis)?;
            let e = random_unit(&mut rng, cfg.dim);
            if k == truth_index {
                truth_embedding = e.clone();
                truths.push(SynthTruth {
                    object_id: id.clone(),
                    asset_id: asset_id.clone(),
                    truth_index,
                    transform: transform_k,
                });
            }
            candidates.push(CandidateRef {
                asset_id: asset_id.clone(),
                cloud: rel,
                embedding: EmbeddingRef {
                    file: "embeddings/assets.bin".into(),
                    row: asset_rows.len(),
                },
                provenance: if k % 2 == 0 {
                    "generated".into()
                } else {
                    "retrieved".into()
                },
            });
            asset_rows.push(f32_row(&e));
            asset_ids.push(asset_id);
        }

        let image_row = query_rows.len();
        query_rows.push(f32_row(&noisy_unit(&mut rng, &truth_embedding, cfg.query_noise)));
        query_rows.push(f32_row(&noisy_unit(&mut rng, &truth_embedding, cfg.query_noise)));
        query_ids.push(id.clone());
        query_ids.push(id.clone());

        objects.push(ManifestObject {
            id: id.clone(),
            category: category.clone(),
            scan: scan_rel,
            image: Some(image_rel),
            caption: Some(format!("a {}", category.replace('_', " "))),
            query: QueryRefs {
                image: Some(EmbeddingRef {
                    file: "embeddings/queries.bin".into(),
                    row: image_row,
                }),
                text: Some(EmbeddingRef {
                    file: "embeddings/queries.bin".into(),
                    row: image_row + 1,
                }),
            },
            candidates,
            truth_asset_id: Some(truths.last().map(|t| t.asset_id.clone()).unwrap_or_default()),
        });
    }

    if !objects.is_empty() {
        EmbeddingMatrix::new(cfg.dim, asset_rows, asset_ids)?.write(&dir.join("embeddings/assets.bin"))?;
        EmbeddingMatrix::new(cfg.dim, query_rows, query_ids)?.write(&dir.join("embeddings/queries.bin"))?;
    }

    let mut manifest = Manifest::new(cfg.scene_id.clone(), objects);
    manifest.up_axis = cfg.up_axis;
    if cfg.with_scorer {
        let weights: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
        write_sorted_json(&dir.join("scorer.json"), &PointScorerWeights::new(weights, 0.0)?)?;
        manifest.scorer = Some("scorer.json".into());
    }
    write_sorted_json(&dir.join(crate::bundle::MANIFEST_FILE), &manifest)?;
    Ok(SynthBundle { manifest, truths })
}
