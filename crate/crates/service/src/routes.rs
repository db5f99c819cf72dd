use std::path::Path;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::de::DeserializeOwned;
use serde_json::Value;

use replica_core::annotation::{qc_sample, validate_record, AnnotationRecord, FieldError, QcBatchReport};
use replica_core::bundle::{export_training_set, qualified_id, resolve, sort_keys};

use crate::api::*;
use crate::error::ServiceError;
use crate::render::{front_view_png, png_payload, THUMBNAIL_PX};
use crate::state::{AppState, SceneState};

type ApiResult<T> = Result<T, ServiceError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenes", get(list_scenes))
        .route("/scenes/{id}/objects", get(list_objects))
        .route("/objects/{id}", get(object_view))
        .route("/objects/{id}/candidates", get(candidates))
        .route("/objects/{id}/annotation", post(submit_annotation))
        .route("/qc/{batch}/sample", get(sample))
        .route("/qc/{batch}/verdicts", post(verdicts))
        .route("/export/training", get(export_training))
        .with_state(state)
}

async fn list_scenes(State(app): State<AppState>) -> Json<SceneList> {
    let mut scenes = Vec::with_capacity(app.scenes.len());
    for (id, s) in app.scenes.iter() {
        scenes.push(SceneSummary {
            scene_id: id.clone(),
            objects: s.bundle.manifest.objects.len(),
            annotated: s.log.lock().await.latest_records().len(),
        });
    }
    Json(SceneList { v: API_VERSION, scenes })
}

async fn list_objects(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ObjectList>> {
    let s = app.scene(&id)?;
    let log = s.log.lock().await;
    let objects = s
        .bundle
        .manifest
        .objects
        .iter()
        .map(|o| ObjectSummary {
            id: qualified_id(&id, &o.id),
            object_id: o.id.clone(),
            category: o.category.clone(),
            caption: o.caption.clone(),
            candidates: o.candidates.len(),
            annotated: log.latest(&o.id).is_some(),
        })
        .collect();
    Ok(Json(ObjectList {
        v: API_VERSION,
        scene_id: id,
        objects,
    }))
}

fn image_mime(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "image/png",
    }
}

async fn object_view(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ObjectView>> {
    let (s, object_id) = app.object(&id)?;
    let b = &s.bundle;
    let obj = b.manifest.object(&object_id).expect("resolved above");
    let image = match &obj.image {
        Some(rel) => {
            let path = resolve(&b.root, rel)?;
            let bytes = std::fs::read(&path).map_err(|e| ServiceError::NotFound(format!("image {rel}: {e}")))?;
            let mut img = png_payload(&bytes);
            img.mime = image_mime(&path).into();
            Some(img)
        }
        None => None,
    };
    Ok(Json(ObjectView {
        v: API_VERSION,
        scene_id: b.scene_id().to_string(),
        object_id: object_id.clone(),
        category: obj.category.clone(),
        caption: obj.caption.clone(),
        image,
        scan: CloudView::of(b.scan(&object_id)?, MAX_VIEW_POINTS),
    }))
}

async fn candidates(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<CandidateList>> {
    let (s, object_id) = app.object(&id)?;
    let b = &s.bundle;
    let obj = b.manifest.object(&object_id).expect("resolved above");
    let mut out = Vec::with_capacity(obj.candidates.len());
    for c in &obj.candidates {
        let cloud = b.asset_cloud(&object_id, &c.asset_id)?;
        out.push(CandidateView {
            asset_id: c.asset_id.clone(),
            provenance: c.provenance.clone(),
            thumbnail: png_payload(&front_view_png(&cloud, THUMBNAIL_PX)),
            cloud: CloudView::of(&cloud, MAX_VIEW_POINTS),
        });
    }
    Ok(Json(CandidateList {
        v: API_VERSION,
        scene_id: b.scene_id().to_string(),
        object_id,
        candidates: out,
    }))
}

/// Parses a JSON body, turning any decoding problem into a field error.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::Invalid(vec![FieldError::new("body", e.to_string())]))
}

async fn submit_annotation(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<AnnotationReceipt>)> {
    let (s, object_id) = app.object(&id)?;
    let sub: AnnotationSubmission = parse_body(&body)?;
    if let Some(given) = &sub.object_id {
        if given != &object_id && given != &id {
            return Err(ServiceError::Invalid(vec![FieldError::new(
                "object_id",
                format!("body names '{given}' but the path names '{id}'"),
            )]));
        }
    }
    let record = AnnotationRecord {
        v: sub.v,
        object_id: object_id.clone(),
        best_asset_id: sub.best_asset_id,
        transform: sub.transform,
        ranking: sub.ranking,
        annotator_id: sub.annotator_id,
        timestamp: Some(Utc::now()),
    };
    let obj = s.bundle.manifest.object(&object_id).expect("resolved above");
    let cands: Vec<&str> = obj.candidates.iter().map(|c| c.asset_id.as_str()).collect();
    let errors = validate_record(&record, &cands);
    if !errors.is_empty() {
        return Err(ServiceError::Invalid(errors));
    }
    let record_id = persist(s, |log| Ok(log.append(record))).await?;
    Ok((
        StatusCode::CREATED,
        Json(AnnotationReceipt {
            v: API_VERSION,
            record_id,
            scene_id: s.bundle.scene_id().to_string(),
            object_id,
        }),
    ))
}

/// Applies `f` to a copy of the log, saves it atomically, and only then
/// makes it current. The held lock serializes writers per scene.
async fn persist<T>(
    s: &SceneState,
    f: impl FnOnce(&mut replica_core::annotation::AnnotationLog) -> ApiResult<T>,
) -> ApiResult<T> {
    let mut guard = s.log.lock().await;
    let mut next = guard.clone();
    let out = f(&mut next)?;
    next.save(&s.annotations_path())?;
    *guard = next;
    Ok(out)
}

/// A QC batch is a scene's current records: the latest one per object.
async fn batch_ids(s: &SceneState) -> Vec<u64> {
    let log = s.log.lock().await;
    let mut ids: Vec<u64> = log.latest_records().iter().map(|r| r.record_id).collect();
    ids.sort_unstable();
    ids
}

async fn draw(app: &AppState, batch: &str, seed: u64) -> ApiResult<QcBatchReport> {
    let s = app.scene(batch)?;
    let ids = batch_ids(s).await;
    if ids.is_empty() {
        return Err(ServiceError::Unprocessable(format!(
            "batch '{batch}' has no annotations"
        )));
    }
    Ok(qc_sample(batch, &ids, seed)?)
}

async fn sample(
    State(app): State<AppState>,
    UrlPath(batch): UrlPath<String>,
    Query(q): Query<SampleQuery>,
) -> ApiResult<Json<QcBatchReport>> {
    let seed = q
        .seed
        .ok_or_else(|| ServiceError::BadRequest("query parameter 'seed' is required".into()))?;
    Ok(Json(draw(&app, &batch, seed).await?))
}

async fn verdicts(
    State(app): State<AppState>,
    UrlPath(batch): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<QcBatchReport>> {
    let sub: VerdictSubmission = parse_body(&body)?;
    let mut report = draw(&app, &batch, sub.seed).await?;
    report
        .record_verdicts(sub.verdicts)
        .map_err(|e| ServiceError::Invalid(vec![FieldError::new("verdicts", e.to_string())]))?;
    let s = app.scene(&batch)?;
    let saved = report.clone();
    persist(s, move |log| {
        log.qc.insert(saved.batch_id.clone(), saved);
        Ok(())
    })
    .await?;
    Ok(Json(report))
}

async fn export_training(State(app): State<AppState>) -> ApiResult<Json<Value>> {
    let mut bundles = Vec::with_capacity(app.scenes.len());
    for s in app.scenes.values() {
        bundles.push(s.snapshot().await);
    }
    let export = export_training_set(&bundles)?;
    Ok(Json(sort_keys(
        serde_json::to_value(&export).map_err(replica_core::Error::from)?,
    )))
}
