use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tokio::sync::Mutex;

use replica_core::annotation::{AnnotationLog, ANNOTATIONS_FILE};
use replica_core::bundle::{discover_bundles, split_qualified, SceneBundle};

use crate::error::ServiceError;

/// One scene: the immutable bundle plus its annotation log. The log's mutex
/// doubles as the scene's write lock.
pub struct SceneState {
    pub bundle: SceneBundle,
    pub log: Mutex<AnnotationLog>,
}

impl SceneState {
    pub fn annotations_path(&self) -> PathBuf {
        self.bundle.root.join(ANNOTATIONS_FILE)
    }

    /// Bundle with the current annotations swapped in.
    pub async fn snapshot(&self) -> SceneBundle {
        let mut b = self.bundle.clone();
        b.annotations = self.log.lock().await.clone();
        b
    }
}

#[derive(Clone)]
pub struct AppState {
    pub root: PathBuf,
    pub scenes: Arc<BTreeMap<String, Arc<SceneState>>>,
}

impl AppState {
    /// Ingests every bundle under `root`. Fails on an invalid bundle, on two
    /// bundles sharing a scene id, or when there is nothing to serve.
    pub fn load(root: &Path) -> Result<Self, ServiceError> {
        if !root.is_dir() {
            return Err(ServiceError::BadRequest(format!(
                "{} is not a directory",
                root.display()
            )));
        }
        let mut scenes = BTreeMap::new();
        for dir in discover_bundles(root)? {
            let mut bundle = SceneBundle::ingest(&dir)?;
            let log = std::mem::take(&mut bundle.annotations);
            let id = bundle.scene_id().to_string();
            if scenes.contains_key(&id) {
                return Err(ServiceError::Conflict(format!(
                    "scene id '{id}' appears in two bundles"
                )));
            }
            scenes.insert(
                id,
                Arc::new(SceneState {
                    bundle,
                    log: Mutex::new(log),
                }),
            );
        }
        if scenes.is_empty() {
            return Err(ServiceError::NotFound(format!(
                "no scene bundles under {}",
                root.display()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            scenes: Arc::new(scenes),
        })
    }

    pub fn scene(&self, id: &str) -> Result<&Arc<SceneState>, ServiceError> {
        self.scenes
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("no scene '{id}'")))
    }

    /// Resolves `scene:object` or a bare object id unique across scenes.
    pub fn object(&self, id: &str) -> Result<(&Arc<SceneState>, String), ServiceError> {
        match split_qualified(id) {
            (Some(scene), object) => {
                let s = self.scene(scene)?;
                s.bundle.object_index(object).map_err(|_| not_found(id))?;
                Ok((s, object.to_string()))
            }
            (None, object) => {
                let hits: Vec<&Arc<SceneState>> = self
                    .scenes
                    .values()
                    .filter(|s| s.bundle.manifest.object(object).is_some())
                    .collect();
                match hits.as_slice() {
                    [s] => Ok((s, object.to_string())),
                    [] => Err(not_found(id)),
                    _ => Err(ServiceError::Conflict(format!(
                        "object id '{id}' exists in several scenes; use scene:object"
                    ))),
                }
            }
        }
    }
}

fn not_found(id: &str) -> ServiceError {
    ServiceError::NotFound(format!("no object '{id}'"))
}
