use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use replica_core::bundle::{SceneBundle, MANIFEST_FILE};
use replica_core::category::CategoryMap;
use replica_core::geometry::{ply, Aabb, PointCloud};
use replica_core::layout::collision_loss;
use replica_core::metrics::{bbox_iou, normalized_chamfer, object_key, size_error};
use replica_core::pipeline::{
    augment_scene, eval_bundles, export_scene, extract_microscenes, run_pipeline, sample_alternative, AssetSource,
    PipelineConfig, METRICS_JSON, NODES_FILE, TRACE_CSV,
};
use replica_core::scene::{PlacementStatus, SceneLayout, SceneObject};
use replica_core::scene_graph::{build_scene_graph, RelationKind};
use replica_core::synth::{write_synthetic_bundle, SynthConfig};

fn oracle_cfg(seed: u64) -> SynthConfig {
    SynthConfig {
        scene_id: format!("oracle{seed}"),
        objects: 5,
        oracle: true,
        query_noise: 0.0,
        points_per_asset: 200,
        seed,
        ..SynthConfig::default()
    }
}

fn run_and_export(src: &Path, out: &Path) -> replica_core::pipeline::PipelineOutput {
    let b = SceneBundle::ingest(src).unwrap();
    let o = run_pipeline(&b, &PipelineConfig::default()).unwrap();
    export_scene(&b, &o.layout, &o.graph, Some(&o), out).unwrap();
    o
}

#[test]
fn oracle_bundle_is_matched_and_fitted_exactly() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_bundle(dir.path(), &oracle_cfg(1)).unwrap();
    let b = SceneBundle::ingest(dir.path()).unwrap();
    let o = run_pipeline(&b, &PipelineConfig::default()).unwrap();
    let s = &o.metrics.per_scene["oracle1"];
    assert_eq!(s.top1, Some(1.0));
    assert_eq!(o.metrics.per_object.len(), 5);
    for m in o.metrics.per_object.values() {
        assert!(m.cd.unwrap() < 1e-6, "cd {:?}", m.cd);
        assert!((m.iou - 1.0).abs() < 1e-9);
    }
    assert!(collision_loss(&o.layout) <= collision_loss(&o.initial));
    assert!(o.violations.is_empty());
}

#[test]
fn empty_scene_gives_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_synthetic_bundle(
        dir.path(),
        &SynthConfig {
            objects: 0,
            ..SynthConfig::default()
        },
    )
    .unwrap();
    let o = run_and_export(dir.path(), out.path());
    assert!(o.layout.objects.is_empty());
    assert!(o.metrics.per_object.is_empty());
    assert!(o.optimize.is_none());
    assert!(SceneBundle::ingest(out.path()).is_ok());
}

#[test]
fn reruns_are_byte_identical() {
    let src = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        objects: 6,
        supported: 2,
        points_per_asset: 150,
        seed: 9,
        ..SynthConfig::default()
    };
    write_synthetic_bundle(src.path(), &cfg).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_and_export(src.path(), a.path());
    run_and_export(src.path(), b.path());
    for f in [MANIFEST_FILE, METRICS_JSON, NODES_FILE, TRACE_CSV, "metrics.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exported_scene_reingests_with_its_layout() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_synthetic_bundle(
        src.path(),
        &SynthConfig {
            up_axis: replica_core::bundle::UpAxis::Y,
            ..oracle_cfg(2)
        },
    )
    .unwrap();
    let o = run_and_export(src.path(), out.path());
    let back = SceneBundle::ingest(out.path()).unwrap();
    assert_eq!(back.manifest.layout.as_ref(), Some(&o.layout));
    assert_eq!(back.manifest.scene_graph.as_ref(), Some(&o.graph));
    assert_eq!(back.layout().unwrap(), o.layout);
}

#[test]
fn a_failing_object_becomes_a_placeholder() {
    let dir = tempfile::tempdir().unwrap();
    let synth = write_synthetic_bundle(dir.path(), &oracle_cfg(3)).unwrap();
    let bad = &synth.truths[1];
    let single = PointCloud::from_xyz(&[[0.0, 0.0, 0.0]]).unwrap();
    ply::write_ply(&dir.path().join(format!("clouds/{}.ply", bad.asset_id)), &single).unwrap();

    let b = SceneBundle::ingest(dir.path()).unwrap();
    let o = run_pipeline(&b, &PipelineConfig::default()).unwrap();
    let obj = o.layout.object(&bad.object_id).unwrap();
    assert_eq!(obj.status, PlacementStatus::Placeholder);
    assert!(obj.error.as_deref().unwrap().contains("zero extent"));
    assert_eq!(obj.bbox, b.scan(&bad.object_id).unwrap().aabb().unwrap());
    assert_eq!(o.metrics.per_object.len(), 4);
    assert!(!o
        .metrics
        .per_object
        .contains_key(&object_key("oracle3", &bad.object_id)));
}

// Augmentation.

struct Unit;

impl AssetSource for Unit {
    fn asset_cloud(&self, _: &str, asset_id: &str) -> replica_core::Result<PointCloud> {
        let s = 1.0 + asset_id.len() as f64 * 0.1;
        PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [s, 0.5, 0.0], [0.0, 0.5, 0.4], [s, 0.0, 0.4]])
    }

    fn scan_cloud(&self, _: &str) -> replica_core::Result<PointCloud> {
        PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.5, 0.0], [0.0, 0.5, 0.4], [1.0, 0.0, 0.4]])
    }
}

fn ranked_layout(n: usize, ranking: &[&str]) -> SceneLayout {
    let objects = (0..n)
        .map(|i| {
            let mut o = SceneObject::new(
                format!("o{i}"),
                "chair",
                Aabb::from_min_size(Point3::new(i as f64 * 3.0, 0.0, 0.0), Vector3::new(1.0, 0.5, 0.4)).unwrap(),
            );
            o.ranking = ranking.iter().map(|s| s.to_string()).collect();
            o
        })
        .collect();
    SceneLayout::new("aug", objects)
}

#[test]
fn single_alternative_is_always_chosen() {
    let layout = ranked_layout(4, &["best", "second"]);
    for seed in 0..20 {
        let out = augment_scene(&layout, None, 1, seed, &Unit, &Default::default()).unwrap();
        assert!(out.objects.iter().all(|o| o.asset_id.as_deref() == Some("second")));
    }
}

#[test]
fn augmentation_is_seeded_and_keeps_the_footprint() {
    let layout = ranked_layout(5, &["a", "bb", "ccc", "dddd", "eeeee", "ffffff"]);
    let x = augment_scene(&layout, None, 5, 7, &Unit, &Default::default()).unwrap();
    let y = augment_scene(&layout, None, 5, 7, &Unit, &Default::default()).unwrap();
    assert_eq!(x, y);
    for (before, after) in layout.objects.iter().zip(&x.objects) {
        let (p, q) = (before.bbox.center(), after.bbox.center());
        assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
        assert!((before.bbox.min.z - after.bbox.min.z).abs() < 1e-9);
        assert_ne!(after.asset_id.as_deref(), Some("a"));
    }
}

#[test]
fn missing_ranking_is_an_error() {
    let layout = ranked_layout(1, &["only"]);
    assert!(augment_scene(&layout, None, 1, 0, &Unit, &Default::default()).is_err());
}

#[test]
fn alternatives_are_drawn_uniformly() {
    let ranking: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..1000 {
        *counts
            .entry(sample_alternative(&ranking, 4, &mut rng).unwrap().to_string())
            .or_default() += 1;
    }
    assert_eq!(counts.len(), 4);
    for k in ["c1", "c2", "c3", "c4"] {
        let f = counts[k] as f64 / 1000.0;
        assert!((f - 0.25).abs() <= 0.03, "{k}: {f}");
    }
}

proptest! {
    #[test]
    fn augmentation_never_picks_rank_one(len in 2usize..10, k in 1usize..=5, seed in any::<u64>()) {
        let ranking: Vec<String> = (0..len).map(|i| format!("c{i}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let pick = sample_alternative(&ranking, k, &mut rng).unwrap();
            let pos = ranking.iter().position(|r| r == pick).unwrap();
            prop_assert!(pos >= 1 && pos <= k);
        }
    }
}

// Micro-scenes.

fn boxed(id: &str, category: &str, min: [f64; 3], size: [f64; 3]) -> SceneObject {
    SceneObject::new(
        id,
        category,
        Aabb::from_min_size(
            Point3::new(min[0], min[1], min[2]),
            Vector3::new(size[0], size[1], size[2]),
        )
        .unwrap(),
    )
}

#[test]
fn table_with_three_items_is_one_microscene() {
    let mut objects = vec![boxed("t", "table", [0.0, 0.0, 0.0], [2.0, 1.0, 0.75])];
    for i in 0..3 {
        objects.push(boxed(
            &format!("s{i}"),
            "cup",
            [0.2 + i as f64 * 0.5, 0.3, 0.75],
            [0.1, 0.1, 0.12],
        ));
    }
    objects.push(boxed("lamp", "lamp", [4.0, 0.0, 0.0], [0.3, 0.3, 1.2]));
    let layout = SceneLayout::new("m", objects);
    let graph = build_scene_graph(&layout);
    let micro = extract_microscenes(&layout, &graph, &CategoryMap::default_map());
    assert_eq!(micro.len(), 1);
    assert_eq!(micro[0].large_object.id, "t");
    assert_eq!(micro[0].small_objects.len(), 3);
    assert!(micro[0].small_objects.iter().all(|s| s.category == "mug"));
}

#[test]
fn no_large_furniture_means_no_microscenes() {
    let layout = SceneLayout::new(
        "m",
        vec![
            boxed("l", "lamp", [0.0, 0.0, 0.0], [0.5, 0.5, 0.5]),
            boxed("c", "cup", [0.1, 0.1, 0.5], [0.1, 0.1, 0.1]),
        ],
    );
    let graph = build_scene_graph(&layout);
    assert!(extract_microscenes(&layout, &graph, &CategoryMap::default_map()).is_empty());
}

#[test]
fn thirty_items_are_capped_at_twenty_three() {
    let mut objects = vec![boxed("t", "dining_table", [0.0, 0.0, 0.0], [6.0, 5.0, 0.75])];
    for i in 0..30 {
        let size = 0.05 + 0.005 * i as f64;
        let (r, c) = (i / 6, i % 6);
        objects.push(boxed(
            &format!("s{i:02}"),
            "book",
            [c as f64 * 1.0, r as f64 * 1.0, 0.75],
            [size, size, size],
        ));
    }
    let layout = SceneLayout::new("m", objects);
    let graph = build_scene_graph(&layout);
    assert_eq!(graph.children_of("t", RelationKind::Support).len(), 30);
    let micro = extract_microscenes(&layout, &graph, &CategoryMap::default_map());
    assert_eq!(micro[0].small_objects.len(), 23);
    assert_eq!(micro[0].object_count(), 24);
    let kept: Vec<&str> = micro[0].small_objects.iter().map(|s| s.id.as_str()).collect();
    let expected: Vec<String> = (7..30).map(|i| format!("s{i:02}")).collect();
    assert_eq!(kept, expected.iter().map(String::as_str).collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn microscene_children_are_support_children(n in 1usize..20, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut objects = vec![boxed("t", "desk", [0.0, 0.0, 0.0], [3.0, 3.0, 0.7])];
        for i in 0..n {
            let z = if rng.gen_bool(0.7) { 0.7 } else { 0.0 };
            let x = rng.gen_range(-1.0..3.5);
            objects.push(boxed(&format!("s{i}"), "book", [x, rng.gen_range(0.0..2.5), z], [0.2, 0.2, 0.2]));
        }
        let layout = SceneLayout::new("p", objects);
        let graph = build_scene_graph(&layout);
        let micro = extract_microscenes(&layout, &graph, &CategoryMap::default_map());
        let mut children = graph.children_of("t", RelationKind::Support);
        children.sort();
        if children.is_empty() {
            prop_assert!(micro.is_empty());
        } else {
            let mut got: Vec<&str> = micro[0].small_objects.iter().map(|s| s.id.as_str()).collect();
            got.sort();
            prop_assert_eq!(got, children);
        }
    }
}

// Evaluation.

#[test]
fn prediction_equal_to_truth_scores_perfectly() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_synthetic_bundle(src.path(), &oracle_cfg(4)).unwrap();
    run_and_export(src.path(), out.path());
    let p = SceneBundle::ingest(out.path()).unwrap();
    let g = SceneBundle::ingest(out.path()).unwrap();
    let r = eval_bundles(&[p], &[g], &CategoryMap::default_map()).unwrap();
    assert_eq!(r.summary.top1, Some(1.0));
    assert_eq!(r.summary.scale_err_m, Some(0.0));
    assert_eq!(r.summary.ckl, Some(0.0));
    for m in r.per_object.values() {
        assert_eq!(m.cd, Some(0.0));
        assert_eq!(m.iou, 1.0);
        assert_eq!(m.size_err_m3, 0.0);
    }
}

#[test]
fn oracle_pipeline_against_raw_truth_has_zero_errors() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_synthetic_bundle(src.path(), &oracle_cfg(5)).unwrap();
    run_and_export(src.path(), out.path());
    let p = SceneBundle::ingest(out.path()).unwrap();
    let g = SceneBundle::ingest(src.path()).unwrap();
    let r = eval_bundles(&[p], &[g], &CategoryMap::default_map()).unwrap();
    assert_eq!(r.summary.top1, Some(1.0));
    assert!(r.summary.scale_err_m.unwrap() < 1e-9);
    for m in r.per_object.values() {
        assert!(m.size_err_m3 < 1e-9 && m.cd.unwrap() < 1e-6);
    }
}

#[test]
fn eval_matches_direct_metric_calls() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_synthetic_bundle(
        src.path(),
        &SynthConfig {
            points_per_asset: 120,
            seed: 6,
            ..SynthConfig::default()
        },
    )
    .unwrap();
    let o = run_and_export(src.path(), out.path());
    let p = SceneBundle::ingest(out.path()).unwrap();
    let g = SceneBundle::ingest(src.path()).unwrap();
    let r = eval_bundles(std::slice::from_ref(&p), std::slice::from_ref(&g), &CategoryMap::default_map()).unwrap();
    for obj in &o.layout.objects {
        let placed = p
            .asset_cloud(&obj.id, obj.asset_id.as_ref().unwrap())
            .unwrap()
            .transformed(obj.transform.as_ref().unwrap());
        let scan = g.scan(&obj.id).unwrap();
        let m = &r.per_object[&object_key("synth", &obj.id)];
        assert_eq!(m.cd, Some(normalized_chamfer(&placed, scan).unwrap()));
        assert_eq!(m.iou, bbox_iou(&placed.aabb().unwrap(), &scan.aabb().unwrap()).unwrap());
        assert_eq!(
            m.size_err_m3,
            size_error(&placed.aabb().unwrap(), &scan.aabb().unwrap())
        );
    }
}

#[test]
fn eval_rejects_mismatched_scene_ids() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_synthetic_bundle(a.path(), &oracle_cfg(7)).unwrap();
    write_synthetic_bundle(b.path(), &oracle_cfg(8)).unwrap();
    run_and_export(a.path(), out.path());
    let p = SceneBundle::ingest(out.path()).unwrap();
    let g = SceneBundle::ingest(b.path()).unwrap();
    assert!(eval_bundles(&[p], &[g], &CategoryMap::default_map()).is_err());
}
