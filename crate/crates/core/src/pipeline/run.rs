use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_pose_with, AlignmentResult};
use crate::bundle::SceneBundle;
use crate::category::CategoryMap;
use crate::error::{Error, Result};
use crate::geometry::{estimate_floor_plan, Aabb, PointCloud};
use crate::layout::{optimize_layout, OptimizeResult};
use crate::matching::{rank_candidates, score_loss, Ranking};
use crate::metrics::{
    bbox_iou, collision_rates, color_histogram_kl, normalized_chamfer, normalized_enhanced_chamfer, object_key,
    scale_error, size_error, topk_accuracy, EcdOptions, MetricsReport, ObjectMetrics, SceneMetrics,
};
use crate::scene::{PlacementStatus, SceneLayout, SceneObject};
use crate::scene_graph::{build_scene_graph_with, validate_graph, SceneGraph, Violation};

use super::config::PipelineConfig;
use super::microscene::{extract_microscenes, pooled_out_of_plane_rate};

/// Ranking of one object's candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMatch {
    pub object_id: String,
    pub ranking: Ranking,
    /// Matching loss against the known truth, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

/// The chosen asset fitted onto its scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAlignment {
    pub object_id: String,
    pub asset_id: String,
    pub alignment: AlignmentResult,
    pub bbox: Aabb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Placed layout before optimization.
    pub initial: SceneLayout,
    pub layout: SceneLayout,
    pub graph: SceneGraph,
    pub metrics: MetricsReport,
    pub optimize: Option<OptimizeResult>,
    /// Relations broken in the final layout; empty on success.
    pub violations: Vec<Violation>,
}

pub fn match_objects(bundle: &SceneBundle, cfg: &PipelineConfig) -> Result<Vec<ObjectMatch>> {
    let scorer = if cfg.matching.use_scorer {
        bundle.scorer.as_ref()
    } else {
        None
    };
    bundle
        .candidate_sets
        .par_iter()
        .map(|set| {
            let ranking = rank_candidates(set, scorer)?;
            let loss = match bundle.truth_asset(&set.object_id) {
                Some(t) => match set.candidates.iter().position(|c| c.asset_id == t) {
                    Some(i) => Some(score_loss(&ranking.scores.fused, i, cfg.matching.loss)?.loss),
                    None => None,
                },
                None => None,
            };
            Ok(ObjectMatch {
                object_id: set.object_id.clone(),
                ranking,
                loss,
            })
        })
        .collect()
}

/// Aligns `asset_id` onto the object's scan.
pub fn align_object(
    bundle: &SceneBundle,
    object_id: &str,
    asset_id: &str,
    cfg: &PipelineConfig,
) -> Result<(ObjectAlignment, PointCloud)> {
    let asset = bundle.asset_cloud(object_id, asset_id)?;
    let scan = bundle.scan(object_id)?;
    let alignment = align_pose_with(&asset, scan, &cfg.alignment)?;
    let placed = asset.transformed(&alignment.transform);
    Ok((
        ObjectAlignment {
            object_id: object_id.to_string(),
            asset_id: asset_id.to_string(),
            bbox: placed.aabb()?,
            alignment,
        },
        placed,
    ))
}

/// Top-1 of each ranking aligned onto its scan. Failures come back as
/// errors per object.
pub fn align_matches(
    bundle: &SceneBundle,
    matches: &[ObjectMatch],
    cfg: &PipelineConfig,
) -> Vec<Result<(ObjectAlignment, PointCloud)>> {
    matches
        .par_iter()
        .map(|m| {
            let best = m
                .ranking
                .asset_ids
                .first()
                .ok_or_else(|| Error::Precondition(format!("object '{}' has an empty ranking", m.object_id)))?;
            align_object(bundle, &m.object_id, best, cfg)
        })
        .collect()
}

/// Layout from per-object outcomes. A failed object keeps its scan box and is
/// marked as a placeholder with the error text.
pub fn placed_layout(
    bundle: &SceneBundle,
    matches: &[ObjectMatch],
    aligned: &[Result<(ObjectAlignment, PointCloud)>],
    cfg: &PipelineConfig,
) -> Result<SceneLayout> {
    let mut objects = Vec::with_capacity(bundle.manifest.objects.len());
    for (i, o) in bundle.manifest.objects.iter().enumerate() {
        let scan_box = bundle.scans[i].aabb()?;
        let mut obj = SceneObject::new(o.id.clone(), o.category.clone(), scan_box);
        if let Some(m) = matches.iter().find(|m| m.object_id == o.id) {
            obj.ranking = m.ranking.asset_ids.clone();
        }
        match aligned.iter().flatten().find(|(a, _)| a.object_id == o.id) {
            Some((a, _)) => {
                obj.bbox = a.bbox;
                obj.asset_id = Some(a.asset_id.clone());
                obj.transform = Some(a.alignment.transform);
            }
            None => {
                obj.status = PlacementStatus::Placeholder;
                obj.error = Some(
                    aligned
                        .iter()
                        .zip(matches)
                        .find(|(_, m)| m.object_id == o.id)
                        .and_then(|(r, _)| r.as_ref().err().map(|e| e.to_string()))
                        .unwrap_or_else(|| "no match for object".into()),
                );
            }
        }
        objects.push(obj);
    }
    let mut layout = SceneLayout::new(bundle.scene_id(), objects);
    layout.floor_z = bundle.manifest.floor_z;
    layout.floor = match &bundle.manifest.floor {
        Some(f) => Some(f.clone()),
        None if layout.objects.is_empty() => None,
        None => {
            let mut boxes = bundle.scan_boxes()?;
            boxes.extend(layout.boxes());
            Some(estimate_floor_plan(&boxes, cfg.floor.mode)?)
        }
    };
    Ok(layout)
}

/// Similarity of a placed asset against the scan it replaces.
pub fn object_metrics(placed: &PointCloud, scan: &PointCloud) -> Result<ObjectMetrics> {
    let (pb, sb) = (placed.aabb()?, scan.aabb()?);
    let color_hist_kl = match (placed.colors(), scan.colors()) {
        (Some(_), Some(_)) => Some(color_histogram_kl(placed, scan)?),
        _ => None,
    };
    Ok(ObjectMetrics {
        cd: Some(normalized_chamfer(placed, scan)?),
        ecd: Some(normalized_enhanced_chamfer(placed, scan, EcdOptions::default())?),
        iou: bbox_iou(&pb, &sb)?,
        color_hist_kl,
        size_err_m3: size_error(&pb, &sb),
    })
}

/// Top-k over objects that have both a ranking and a known truth.
pub fn ranking_accuracy(pairs: &[(Vec<String>, String)], k: usize) -> Result<Option<f64>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let (rankings, truths): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
    topk_accuracy(&rankings, &truths, k).map(Some)
}

/// Scene-level numbers for a final layout. `reference` holds the boxes the
/// layout is compared against, in the same object order.
pub fn scene_metrics(
    layout: &SceneLayout,
    graph: &SceneGraph,
    reference: &[Aabb],
    truths: &[(Vec<String>, String)],
    map: &CategoryMap,
) -> Result<SceneMetrics> {
    let boxes = layout.boxes();
    let rates = collision_rates(&boxes);
    let micro = extract_microscenes(layout, graph, map);
    Ok(SceneMetrics {
        scale_err_m: if boxes.is_empty() {
            None
        } else {
            Some(scale_error(&boxes, reference)?)
        },
        top1: ranking_accuracy(truths, 1)?,
        top5: ranking_accuracy(truths, 5)?,
        col_obj: rates.col_obj,
        col_scene: rates.col_scene,
        r_out: pooled_out_of_plane_rate(&micro)?,
        ckl: None,
    })
}

/// Match, align, build the scene graph, optimize, and score one bundle.
pub fn run_pipeline(bundle: &SceneBundle, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let matches = match_objects(bundle, cfg)?;
    let aligned = align_matches(bundle, &matches, cfg);
    let initial = placed_layout(bundle, &matches, &aligned, cfg)?;
    let graph = build_scene_graph_with(&initial, &cfg.thresholds);

    let optimize = if initial.objects.is_empty() {
        None
    } else {
        Some(optimize_layout(&initial, &graph, &cfg.optimizer)?)
    };
    let layout = optimize.as_ref().map_or_else(|| initial.clone(), |o| o.scene.clone());
    let violations = validate_graph(&graph, &layout)?;

    let scene_id = bundle.scene_id().to_string();
    let mut report = MetricsReport::default();
    for (a, placed) in aligned.iter().flatten() {
        let m = object_metrics(placed, bundle.scan(&a.object_id)?)?;
        report.per_object.insert(object_key(&scene_id, &a.object_id), m);
    }
    let truths: Vec<(Vec<String>, String)> = layout
        .objects
        .iter()
        .filter_map(|o| bundle.truth_asset(&o.id).map(|t| (o.ranking.clone(), t)))
        .filter(|(r, _)| !r.is_empty())
        .collect();
    let scene = scene_metrics(
        &layout,
        &graph,
        &bundle.scan_boxes()?,
        &truths,
        &CategoryMap::default_map(),
    )?;
    report.summary = scene.clone();
    report.per_scene.insert(scene_id, scene);

    Ok(PipelineOutput {
        initial,
        layout,
        graph,
        metrics: report,
        optimize,
        violations,
    })
}

/// Per-scene pipeline runs in parallel, results in input order.
pub fn run_pipelines(bundles: &[SceneBundle], cfg: &PipelineConfig) -> Vec<Result<PipelineOutput>> {
    bundles.par_iter().map(|b| run_pipeline(b, cfg)).collect()
}

/// Object keys mapped to failure text for placeholders.
pub fn failures(layout: &SceneLayout) -> BTreeMap<String, String> {
    layout
        .objects
        .iter()
        .filter(|o| o.status == PlacementStatus::Placeholder)
        .map(|o| (o.id.clone(), o.error.clone().unwrap_or_default()))
        .collect()
}
