use std::collections::BTreeMap;
use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower::ServiceExt;

use replica_core::annotation::{qc_sample_size, AnnotationLog, ANNOTATIONS_FILE};
use replica_core::bundle::TrainingExport;
use replica_core::synth::{write_synthetic_bundle, SynthConfig, PLACEHOLDER_PNG};
use replica_service::api::CloudView;
use replica_service::{router, AppState};

fn two_scene_root() -> tempfile::TempDir {
    let root = tempfile::tempdir().unwrap();
    for (name, seed) in [("kitchen", 1), ("office", 2)] {
        let cfg = SynthConfig {
            scene_id: name.into(),
            objects: 3,
            candidates: 6,
            points_per_asset: 80,
            seed,
            ..SynthConfig::default()
        };
        write_synthetic_bundle(&root.path().join(name), &cfg).unwrap();
    }
    root
}

fn app(root: &Path) -> Router {
    router(AppState::load(root).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn submission(best: &str, ranking: &[&str]) -> Value {
    json!({
        "best_asset_id": best,
        "transform": {"translation": [0.1, 0.2, 0.0], "scale": 1.25, "yaw_degrees": 90.0},
        "ranking": ranking,
        "annotator_id": "ann-1"
    })
}

fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), hex);
            }
        }
    }
    out
}

#[tokio::test]
async fn lists_scenes_and_objects() {
    let root = two_scene_root();
    let app = app(root.path());
    let (s, v) = call(&app, "GET", "/scenes", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["v"], 1);
    assert_eq!(v["scenes"].as_array().unwrap().len(), 2);

    let (s, v) = call(&app, "GET", "/scenes/office/objects", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["objects"].as_array().unwrap().len(), 3);
    assert_eq!(v["objects"][0]["id"], "office:obj000");
    assert_eq!(v["objects"][0]["candidates"], 6);

    let (s, v) = call(&app, "GET", "/scenes/garage/objects", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
}

#[tokio::test]
async fn unknown_object_is_a_404_with_body() {
    let root = two_scene_root();
    let app = app(root.path());
    for uri in [
        "/objects/office:nope/candidates",
        "/objects/nope/candidates",
        "/objects/attic:obj000",
    ] {
        let (s, v) = call(&app, "GET", uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["v"], 1);
        assert_eq!(v["error"], "not_found");
        assert!(v["message"].as_str().unwrap().contains("no "));
    }
}

#[tokio::test]
async fn bare_ids_must_be_unambiguous() {
    let root = two_scene_root();
    let app = app(root.path());
    let (s, v) = call(&app, "GET", "/objects/obj000", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "conflict");
}

#[tokio::test]
async fn object_view_carries_scan_image_and_caption() {
    let root = two_scene_root();
    let app = app(root.path());
    let (s, v) = call(&app, "GET", "/objects/kitchen:obj001", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["object_id"], "obj001");
    assert!(v["caption"].as_str().unwrap().starts_with("a "));
    assert_eq!(v["scan"]["points"].as_array().unwrap().len(), 80);
    assert_eq!(v["scan"]["stride"], 1);
    assert_eq!(v["image"]["mime"], "image/png");
    let png = base64::engine::general_purpose::STANDARD
        .decode(v["image"]["data"].as_str().unwrap())
        .unwrap();
    assert_eq!(png, PLACEHOLDER_PNG);
}

#[test]
fn large_scans_are_thinned_below_the_cap() {
    let pts: Vec<[f64; 3]> = (0..120_001).map(|i| [i as f64, 0.0, 0.0]).collect();
    let cloud = replica_core::geometry::PointCloud::from_xyz(&pts).unwrap();
    let view = CloudView::of(&cloud, 50_000);
    assert_eq!(view.stride, 3);
    assert_eq!(view.points.len(), 40_001);
    assert_eq!(view.total_points, 120_001);
}

#[tokio::test]
async fn candidates_have_clouds_thumbnails_and_provenance() {
    let root = two_scene_root();
    let app = app(root.path());
    let (s, v) = call(&app, "GET", "/objects/kitchen:obj002/candidates", None).await;
    assert_eq!(s, StatusCode::OK);
    let cands = v["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 6);
    for c in cands {
        assert!(["generated", "retrieved"].contains(&c["provenance"].as_str().unwrap()));
        assert_eq!(c["cloud"]["points"].as_array().unwrap().len(), 80);
        let png = base64::engine::general_purpose::STANDARD
            .decode(c["thumbnail"]["data"].as_str().unwrap())
            .unwrap();
        let img = image::load_from_memory(&png).unwrap();
        assert_eq!((img.width(), img.height()), (64, 64));
    }
}

#[tokio::test]
async fn annotation_validation() {
    let root = two_scene_root();
    let app = app(root.path());
    let uri = "/objects/kitchen:obj000/annotation";

    let ok = submission("obj000_a0", &["obj000_a1", "obj000_a2", "obj000_a3"]);
    let (s, v) = call(&app, "POST", uri, Some(ok)).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["record_id"], 1);

    let six = submission(
        "obj000_a0",
        &[
            "obj000_a1",
            "obj000_a2",
            "obj000_a3",
            "obj000_a4",
            "obj000_a5",
            "obj000_a1",
        ],
    );
    let (s, v) = call(&app, "POST", uri, Some(six)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "validation");
    assert!(v["fields"].as_array().unwrap().iter().any(|f| f["field"] == "ranking"));

    let repeated = submission("obj000_a0", &["obj000_a1", "obj000_a0"]);
    let (s, v) = call(&app, "POST", uri, Some(repeated)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["fields"].as_array().unwrap().iter().any(|f| f["field"] == "ranking"));

    let stranger = submission("someone_else", &["obj000_a1", "obj000_a2"]);
    let (s, v) = call(&app, "POST", uri, Some(stranger)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["fields"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["field"] == "best_asset_id"));

    let (s, v) = call(&app, "POST", uri, Some(json!({"best_asset_id": 3}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"][0]["field"], "body");

    let log = AnnotationLog::load(&root.path().join("kitchen").join(ANNOTATIONS_FILE)).unwrap();
    assert_eq!(log.records.len(), 1);
    assert!(log.records[0].record.timestamp.is_some());
}

#[tokio::test]
async fn posted_annotation_appears_in_export_and_survives_restart() {
    let root = two_scene_root();
    let app1 = app(root.path());
    let (s, _) = call(
        &app1,
        "POST",
        "/objects/office:obj001/annotation",
        Some(submission("obj001_a4", &["obj001_a0", "obj001_a2", "obj001_a5"])),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = call(
        &app1,
        "POST",
        "/objects/office:obj001/annotation",
        Some(submission("obj001_a3", &["obj001_a0", "obj001_a2"])),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);

    let (s, first) = call(&app1, "GET", "/export/training", None).await;
    assert_eq!(s, StatusCode::OK);
    let export: TrainingExport = TrainingExport::from_json(&first.to_string()).unwrap();
    assert_eq!(export.quadruples.len(), 1);
    let q = &export.quadruples[0];
    assert_eq!(q.record_id, 2);
    assert_eq!(q.annotation.best_asset_id, "obj001_a3");
    assert_eq!(q.annotation.ranking, vec!["obj001_a0", "obj001_a2"]);
    assert_eq!(q.annotation.transform.scale(), 1.25);
    assert_eq!(q.annotation.annotator_id, "ann-1");
    assert_eq!(q.set.truth_index, Some(3));
    assert_eq!(export.unannotated.len(), 5);

    let app2 = app(root.path());
    let (_, second) = call(&app2, "GET", "/export/training", None).await;
    assert_eq!(first.to_string(), second.to_string());
    let log = AnnotationLog::load(&root.path().join("office").join(ANNOTATIONS_FILE)).unwrap();
    assert_eq!(log.records.len(), 2);
}

#[tokio::test]
async fn read_endpoints_mutate_nothing() {
    let root = two_scene_root();
    let app = app(root.path());
    call(
        &app,
        "POST",
        "/objects/kitchen:obj000/annotation",
        Some(submission("obj000_a1", &["obj000_a0", "obj000_a2"])),
    )
    .await;
    let before = tree_hashes(root.path());
    for _ in 0..2 {
        for uri in [
            "/scenes",
            "/scenes/kitchen/objects",
            "/objects/kitchen:obj000",
            "/objects/kitchen:obj000/candidates",
            "/qc/kitchen/sample?seed=3",
            "/export/training",
        ] {
            let (s, _) = call(&app, "GET", uri, None).await;
            assert_eq!(s, StatusCode::OK, "{uri}");
        }
    }
    assert_eq!(before, tree_hashes(root.path()));
}

#[tokio::test]
async fn concurrent_writes_are_serialized() {
    let root = two_scene_root();
    let app = app(root.path());
    let mut handles = Vec::new();
    for i in 0..24 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let obj = format!("obj00{}", i % 3);
            let body = submission(&format!("{obj}_a0"), &[&format!("{obj}_a1"), &format!("{obj}_a2")]);
            call(&app, "POST", &format!("/objects/kitchen:{obj}/annotation"), Some(body)).await
        }));
    }
    let mut ids = Vec::new();
    for h in handles {
        let (s, v) = h.await.unwrap();
        assert_eq!(s, StatusCode::CREATED);
        ids.push(v["record_id"].as_u64().unwrap());
    }
    ids.sort_unstable();
    assert_eq!(ids, (1..=24).collect::<Vec<u64>>());
    let log = AnnotationLog::load(&root.path().join("kitchen").join(ANNOTATIONS_FILE)).unwrap();
    assert_eq!(log.records.len(), 24);
}

async fn annotate_many(root: &Path, n: usize) -> Router {
    // Many objects in one scene so QC batches of realistic size exist.
    let cfg = SynthConfig {
        scene_id: "big".into(),
        objects: n,
        candidates: 3,
        points_per_asset: 8,
        ..SynthConfig::default()
    };
    write_synthetic_bundle(&root.join("big"), &cfg).unwrap();
    let app = app(root);
    for i in 0..n {
        let o = format!("obj{i:03}");
        let body = submission(&format!("{o}_a0"), &[&format!("{o}_a1"), &format!("{o}_a2")]);
        let (s, _) = call(&app, "POST", &format!("/objects/big:{o}/annotation"), Some(body)).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    app
}

#[tokio::test]
async fn qc_sampling_and_verdicts() {
    let root = tempfile::tempdir().unwrap();
    let app = annotate_many(root.path(), 25).await;

    let (s, a) = call(&app, "GET", "/qc/big/sample?seed=11", None).await;
    assert_eq!(s, StatusCode::OK);
    let (_, b) = call(&app, "GET", "/qc/big/sample?seed=11", None).await;
    assert_eq!(a, b);
    assert_eq!(a["v"], 1);
    let sampled: Vec<u64> = serde_json::from_value(a["sampled"].clone()).unwrap();
    assert_eq!(sampled.len(), qc_sample_size(25));
    assert_eq!(sampled.len(), 3);

    let (s, _) = call(&app, "GET", "/qc/big/sample", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let partial: BTreeMap<String, bool> = sampled.iter().take(2).map(|i| (i.to_string(), true)).collect();
    let (s, v) = call(
        &app,
        "POST",
        "/qc/big/verdicts",
        Some(json!({"seed": 11, "verdicts": partial})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"][0]["field"], "verdicts");

    let all: BTreeMap<String, bool> = sampled.iter().map(|i| (i.to_string(), true)).collect();
    let (s, v) = call(
        &app,
        "POST",
        "/qc/big/verdicts",
        Some(json!({"seed": 11, "verdicts": all})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["accepted"], true);
    assert_eq!(v["pass_count"], 3);

    let mut one_fail: BTreeMap<String, bool> = sampled.iter().map(|i| (i.to_string(), true)).collect();
    one_fail.insert(sampled[0].to_string(), false);
    let (_, v) = call(
        &app,
        "POST",
        "/qc/big/verdicts",
        Some(json!({"seed": 11, "verdicts": one_fail})),
    )
    .await;
    assert_eq!(v["accepted"], false);

    let log = AnnotationLog::load(&root.path().join("big").join(ANNOTATIONS_FILE)).unwrap();
    assert_eq!(log.qc["big"].accepted, Some(false));
}

#[tokio::test]
async fn qc_on_an_empty_batch_is_refused() {
    let root = two_scene_root();
    let app = app(root.path());
    let (s, v) = call(&app, "GET", "/qc/office/sample?seed=1", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["v"], 1);
}

#[tokio::test]
async fn serve_reports_invalid_root_and_busy_port() {
    let empty = tempfile::tempdir().unwrap();
    assert!(AppState::load(empty.path()).is_err());
    assert!(AppState::load(&empty.path().join("missing")).is_err());

    let root = two_scene_root();
    let taken = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = taken.local_addr().unwrap();
    let err = replica_service::serve(root.path(), addr).await.unwrap_err();
    assert!(err.to_string().contains("cannot bind"));
}
