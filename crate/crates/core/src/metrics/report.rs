use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

/// Similarity of one placed object against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub cd: Option<f64>,
    pub ecd: Option<f64>,
    pub iou: f64,
    pub color_hist_kl: Option<f64>,
    pub size_err_m3: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scale_err_m: Option<f64>,
    pub top1: Option<f64>,
    pub top5: Option<f64>,
    pub col_obj: f64,
    pub col_scene: f64,
    pub r_out: Option<f64>,
    pub ckl: Option<f64>,
}

/// Per-object and per-scene metrics. Object keys are `scene_id/object_id`;
/// maps keep keys sorted so serialization is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub v: u32,
    pub per_object: BTreeMap<String, ObjectMetrics>,
    pub per_scene: BTreeMap<String, SceneMetrics>,
    pub summary: SceneMetrics,
}

impl Default for MetricsReport {
    fn default() -> Self {
        Self {
            v: REPORT_VERSION,
            per_object: BTreeMap::new(),
            per_scene: BTreeMap::new(),
            summary: SceneMetrics::default(),
        }
    }
}

pub fn object_key(scene_id: &str, object_id: &str) -> String {
    format!("{scene_id}/{object_id}")
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsReport {
    /// Flat table: one row per object, one per scene, and a summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "level,scene_id,object_id,cd,ecd,iou,color_hist_kl,size_err_m3,scale_err_m,top1,top5,col_obj,col_scene,r_out,ckl\n",
        );
        for (key, m) in &self.per_object {
            let (scene, object) = key.split_once('/').unwrap_or(("", key.as_str()));
            writeln!(
                out,
                "object,{scene},{object},{},{},{},{},{},,,,,,,",
                cell(m.cd),
                cell(m.ecd),
                m.iou,
                cell(m.color_hist_kl),
                m.size_err_m3
            )
            .unwrap();
        }
        let mut scene_row = |level: &str, id: &str, s: &SceneMetrics| {
            writeln!(
                out,
                "{level},{id},,,,,,,{},{},{},{},{},{},{}",
                cell(s.scale_err_m),
                cell(s.top1),
                cell(s.top5),
                s.col_obj,
                s.col_scene,
                cell(s.r_out),
                cell(s.ckl)
            )
            .unwrap();
        };
        for (id, s) in &self.per_scene {
            scene_row("scene", id, s);
        }
        scene_row("summary", "", &self.summary);
        out
    }
}
