use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{align_pose_with, AlignConfig};
use crate::annotation::AnnotationLog;
use crate::bundle::SceneBundle;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scene::{PlacementStatus, SceneLayout};

/// Largest number of alternatives augmentation may draw from.
pub const MAX_AUGMENT_K: usize = 5;

/// Clouds needed to re-fit a swapped asset.
pub trait AssetSource {
    fn asset_cloud(&self, object_id: &str, asset_id: &str) -> Result<PointCloud>;
    fn scan_cloud(&self, object_id: &str) -> Result<PointCloud>;
}

impl AssetSource for SceneBundle {
    fn asset_cloud(&self, object_id: &str, asset_id: &str) -> Result<PointCloud> {
        SceneBundle::asset_cloud(self, object_id, asset_id)
    }

    fn scan_cloud(&self, object_id: &str) -> Result<PointCloud> {
        self.scan(object_id).cloned()
    }
}

/// Uniform draw among ranks 2..=k+1 of `ranking` (best first). With fewer
/// alternatives than `k`, draws among those available.
pub fn sample_alternative<'a>(ranking: &'a [String], k: usize, rng: &mut ChaCha8Rng) -> Result<&'a str> {
    if !(1..=MAX_AUGMENT_K).contains(&k) {
        return Err(Error::InvalidInput(format!(
            "k must be in 1..={MAX_AUGMENT_K}, got {k}"
        )));
    }
    if ranking.len() < 2 {
        return Err(Error::Precondition("ranking needs at least 2 candidates".into()));
    }
    let m = k.min(ranking.len() - 1);
    Ok(&ranking[1 + rng.gen_range(0..m)])
}

/// Best-first ranking for one object: the latest annotation when present,
/// else the ranking stored on the layout.
fn ranking_for(obj: &crate::scene::SceneObject, annotations: Option<&AnnotationLog>) -> Vec<String> {
    if let Some(r) = annotations.and_then(|a| a.latest(&obj.id)) {
        let mut v = vec![r.record.best_asset_id.clone()];
        v.extend(r.record.ranking.iter().cloned());
        return v;
    }
    obj.ranking.clone()
}

/// Swaps every object's asset for a random top-`k` alternative and re-fits
/// it. The new asset is aligned onto the scan, then moved so its box keeps
/// the current footprint center and bottom height, which preserves any
/// placement the optimizer made.
pub fn augment_scene(
    layout: &SceneLayout,
    annotations: Option<&AnnotationLog>,
    k: usize,
    seed: u64,
    source: &dyn AssetSource,
    align: &AlignConfig,
) -> Result<SceneLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = layout.clone();
    for obj in &mut out.objects {
        let ranking = ranking_for(obj, annotations);
        let pick = sample_alternative(&ranking, k, &mut rng)
            .map_err(|e| Error::Precondition(format!("object '{}': {e}", obj.id)))?
            .to_string();
        let asset = source.asset_cloud(&obj.id, &pick)?;
        let scan = source.scan_cloud(&obj.id)?;
        let fit = align_pose_with(&asset, &scan, align)?;
        let placed = asset.transformed(&fit.transform).aabb()?;
        let (old, new) = (obj.bbox.center(), placed.center());
        let shift = Vector3::new(old.x - new.x, old.y - new.y, obj.bbox.min.z - placed.min.z);
        obj.bbox = placed.translated(&shift);
        let moved = fit.transform.translation() + shift;
        obj.transform = Some(fit.transform.with_translation(moved));
        obj.asset_id = Some(pick);
        obj.ranking = ranking;
        obj.status = PlacementStatus::Placed;
        obj.error = None;
    }
    Ok(out)
}
