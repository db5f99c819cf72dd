//! End-to-end scene processing: match, align, graph, optimize, export,
//! augmentation, micro-scenes and evaluation.

mod augment;
mod config;
mod eval;
mod export;
mod microscene;
mod run;

pub use augment::{augment_scene, sample_alternative, AssetSource, MAX_AUGMENT_K};
pub use config::{FloorConfig, MatchingConfig, PipelineConfig};
pub use eval::{eval_bundles, ground_truth_layout, placed_cloud};
pub use export::{
    export_scene, scene_nodes, NodeExtras, NodeList, SceneNode, METRICS_CSV, METRICS_JSON, NODES_FILE, NODES_VERSION,
    TRACE_CSV,
};
pub use microscene::{extract_microscenes, pooled_out_of_plane_rate, MAX_MICROSCENE_OBJECTS};
pub use run::{
    align_matches, align_object, failures, match_objects, object_metrics, placed_layout, ranking_accuracy,
    run_pipeline, run_pipelines, scene_metrics, ObjectAlignment, ObjectMatch, PipelineOutput,
};
