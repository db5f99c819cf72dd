use std::collections::{BTreeMap, BTreeSet};

use crate::bundle::SceneBundle;
use crate::category::CategoryMap;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::metrics::{category_kl, object_key, MetricsReport, SceneMetrics, Smoothing};
use crate::scene::{SceneLayout, SceneObject};
use crate::scene_graph::build_scene_graph;

use super::run::{object_metrics, ranking_accuracy, scene_metrics};

/// Reference layout of a ground-truth bundle. A stored layout wins; else each
/// object takes its latest annotation (best asset at the annotated pose); an
/// unannotated object keeps its scan box and manifest truth asset.
pub fn ground_truth_layout(gt: &SceneBundle) -> Result<SceneLayout> {
    if let Some(l) = &gt.manifest.layout {
        return Ok(l.clone());
    }
    let mut layout = gt.layout()?;
    for obj in &mut layout.objects {
        if let Some(r) = gt.annotations.latest(&obj.id) {
            let cloud = gt.asset_cloud(&obj.id, &r.record.best_asset_id)?;
            obj.bbox = cloud.transformed(&r.record.transform).aabb()?;
            obj.asset_id = Some(r.record.best_asset_id.clone());
            obj.transform = Some(r.record.transform);
            obj.ranking = std::iter::once(r.record.best_asset_id.clone())
                .chain(r.record.ranking.iter().cloned())
                .collect();
        } else {
            obj.asset_id = gt.truth_asset(&obj.id);
        }
    }
    Ok(layout)
}

/// World-space cloud of a layout object: its asset at its pose, or the scan
/// when no asset is placed.
pub fn placed_cloud(bundle: &SceneBundle, obj: &SceneObject) -> Result<PointCloud> {
    match (&obj.asset_id, &obj.transform) {
        (Some(a), Some(t)) => Ok(bundle.asset_cloud(&obj.id, a)?.transformed(t)),
        _ => bundle.scan(&obj.id).cloned(),
    }
}

fn category_histogram(layouts: &[&SceneLayout], map: &CategoryMap) -> BTreeMap<String, f64> {
    let mut h: BTreeMap<String, f64> = map.universe().into_iter().map(|c| (c.to_string(), 0.0)).collect();
    for l in layouts {
        for o in &l.objects {
            *h.entry(map.merge(&o.category)).or_default() += 1.0;
        }
    }
    h
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Scores predicted scenes against ground truth. Scenes pair up by id and
/// must cover the same set of ids with the same objects.
pub fn eval_bundles(pred: &[SceneBundle], gt: &[SceneBundle], map: &CategoryMap) -> Result<MetricsReport> {
    let pred_ids: BTreeSet<&str> = pred.iter().map(|b| b.scene_id()).collect();
    let gt_ids: BTreeSet<&str> = gt.iter().map(|b| b.scene_id()).collect();
    if pred_ids != gt_ids || pred_ids.len() != pred.len() || gt_ids.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "scene ids differ: predicted {pred_ids:?}, ground truth {gt_ids:?}"
        )));
    }
    let mut report = MetricsReport::default();
    let mut all_truths = Vec::new();
    let mut pred_layouts = Vec::new();
    let mut gt_layouts = Vec::new();
    for p in pred {
        let g = gt
            .iter()
            .find(|g| g.scene_id() == p.scene_id())
            .expect("ids checked above");
        let pl = p.manifest.layout.clone().ok_or_else(|| {
            Error::Precondition(format!(
                "predicted scene '{}' has no layout; run the pipeline first",
                p.scene_id()
            ))
        })?;
        let gl = ground_truth_layout(g)?;
        let pobj: BTreeSet<&str> = pl.objects.iter().map(|o| o.id.as_str()).collect();
        let gobj: BTreeSet<&str> = gl.objects.iter().map(|o| o.id.as_str()).collect();
        if pobj != gobj {
            return Err(Error::InvalidInput(format!(
                "scene '{}': object ids differ",
                p.scene_id()
            )));
        }
        let mut reference = Vec::with_capacity(pl.objects.len());
        let mut truths = Vec::new();
        for po in &pl.objects {
            let go = gl.object(&po.id)?;
            reference.push(go.bbox);
            let m = object_metrics(&placed_cloud(p, po)?, &placed_cloud(g, go)?)?;
            report.per_object.insert(object_key(p.scene_id(), &po.id), m);
            if let Some(t) = go.asset_id.clone().or_else(|| g.truth_asset(&po.id)) {
                if !po.ranking.is_empty() {
                    truths.push((po.ranking.clone(), t));
                }
            }
        }
        let graph = match &p.manifest.scene_graph {
            Some(gr) => gr.clone(),
            None => build_scene_graph(&pl),
        };
        let mut s = scene_metrics(&pl, &graph, &reference, &truths, map)?;
        s.ckl = Some(category_kl(
            &category_histogram(&[&pl], map),
            &category_histogram(&[&gl], map),
            Smoothing::AddOne,
        )?);
        report.per_scene.insert(p.scene_id().to_string(), s);
        all_truths.extend(truths);
        pred_layouts.push(pl);
        gt_layouts.push(gl);
    }

    let scenes: Vec<&SceneMetrics> = report.per_scene.values().collect();
    report.summary = SceneMetrics {
        scale_err_m: mean(scenes.iter().filter_map(|s| s.scale_err_m)),
        top1: ranking_accuracy(&all_truths, 1)?,
        top5: ranking_accuracy(&all_truths, 5)?,
        col_obj: mean(scenes.iter().map(|s| s.col_obj)).unwrap_or(0.0),
        col_scene: mean(scenes.iter().map(|s| s.col_scene)).unwrap_or(0.0),
        r_out: mean(scenes.iter().filter_map(|s| s.r_out)),
        ckl: if pred_layouts.is_empty() {
            None
        } else {
            Some(category_kl(
                &category_histogram(&pred_layouts.iter().collect::<Vec<_>>(), map),
                &category_histogram(&gt_layouts.iter().collect::<Vec<_>>(), map),
                Smoothing::AddOne,
            )?)
        },
    };
    Ok(report)
}
