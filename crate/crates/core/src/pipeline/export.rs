use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotation::ANNOTATIONS_FILE;
use crate::bundle::{resolve, write_atomic, write_sorted_json, SceneBundle, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::scene::{PlacementStatus, SceneLayout};
use crate::scene_graph::SceneGraph;

use super::run::PipelineOutput;

pub const NODES_FILE: &str = "nodes.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const TRACE_CSV: &str = "trace.csv";
pub const NODES_VERSION: u32 = 1;

/// Extra per-node data outside the glTF core schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeExtras {
    pub object_id: String,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_id: Option<String>,
    /// Bundle-relative point cloud of the asset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<String>,
    pub yaw_degrees: f64,
    pub status: PlacementStatus,
}

/// glTF node: translation, unit quaternion `[x, y, z, w]`, per-axis scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub name: String,
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
    pub scale: [f64; 3],
    pub extras: NodeExtras,
}

/// Node list usable as the `nodes` array of a glTF scene. Coordinates are
/// +z up, unlike glTF's default +y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeList {
    pub v: u32,
    pub scene_id: String,
    pub up_axis: String,
    pub nodes: Vec<SceneNode>,
}

/// Converts placed objects to nodes. Placeholders get an identity rotation
/// and unit scale at their box's bottom center.
pub fn scene_nodes(bundle: &SceneBundle, layout: &SceneLayout) -> NodeList {
    let nodes = layout
        .objects
        .iter()
        .map(|o| {
            let cloud = o.asset_id.as_ref().and_then(|a| {
                bundle
                    .manifest
                    .object(&o.id)
                    .and_then(|m| m.candidates.iter().find(|c| &c.asset_id == a))
                    .map(|c| c.cloud.clone())
            });
            let (translation, rotation, scale, yaw) = match &o.transform {
                Some(t) => {
                    let half = t.yaw() / 2.0;
                    let tr = t.translation();
                    (
                        [tr.x, tr.y, tr.z],
                        [0.0, 0.0, half.sin(), half.cos()],
                        [t.scale(); 3],
                        t.yaw_degrees(),
                    )
                }
                None => {
                    let c = o.bbox.center();
                    ([c.x, c.y, o.bbox.min.z], [0.0, 0.0, 0.0, 1.0], [1.0; 3], 0.0)
                }
            };
            SceneNode {
                name: o.id.clone(),
                translation,
                rotation,
                scale,
                extras: NodeExtras {
                    object_id: o.id.clone(),
                    category: o.category.clone(),
                    asset_id: o.asset_id.clone(),
                    cloud,
                    yaw_degrees: yaw,
                    status: o.status,
                },
            }
        })
        .collect();
    NodeList {
        v: NODES_VERSION,
        scene_id: layout.scene_id.clone(),
        up_axis: "z".into(),
        nodes,
    }
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Copies the bundle's inputs into `out` (unless it is the bundle itself)
/// and writes the manifest with layout and graph, the node list, and when
/// given, metrics and the optimizer trace. Returns the files written.
pub fn export_scene(
    bundle: &SceneBundle,
    layout: &SceneLayout,
    graph: &SceneGraph,
    output: Option<&PipelineOutput>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    if !same_dir(&bundle.root, out) {
        let mut files = bundle.manifest.referenced_files();
        if bundle.root.join(ANNOTATIONS_FILE).is_file() {
            files.push(ANNOTATIONS_FILE.to_string());
        }
        for rel in files {
            let src = resolve(&bundle.root, &rel)?;
            let bytes = std::fs::read(&src).map_err(|e| Error::io(&src, e))?;
            let dst = resolve(out, &rel)?;
            write_atomic(&dst, &bytes)?;
            written.push(dst);
        }
    }
    let mut manifest = bundle.manifest.clone();
    manifest.layout = Some(layout.clone());
    manifest.scene_graph = Some(graph.clone());
    if manifest.floor.is_none() {
        manifest.floor = layout.floor.clone();
    }
    let p = out.join(MANIFEST_FILE);
    write_sorted_json(&p, &manifest)?;
    written.push(p);
    let p = out.join(NODES_FILE);
    write_sorted_json(&p, &scene_nodes(bundle, layout))?;
    written.push(p);
    if let Some(o) = output {
        let p = out.join(METRICS_JSON);
        write_sorted_json(&p, &o.metrics)?;
        written.push(p);
        let p = out.join(METRICS_CSV);
        write_atomic(&p, o.metrics.to_csv().as_bytes())?;
        written.push(p);
        if let Some(opt) = &o.optimize {
            let p = out.join(TRACE_CSV);
            write_atomic(&p, opt.events_csv().as_bytes())?;
            written.push(p);
        }
    }
    Ok(written)
}
