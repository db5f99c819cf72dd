//! Similarity and physical-plausibility metrics.

mod boxes;
mod chamfer;
mod divergence;
mod physics;
mod report;
mod retrieval;

#[allow(unused_imports)]
pub(crate) use boxes::iou_or_zero;
pub use boxes::{bbox_iou, collision_rates, scale_error, size_error, CollisionRates, COLLISION_IOU_EPS};
pub use chamfer::{
    chamfer_distance, enhanced_chamfer_distance, normalize_pair, normalized_chamfer, normalized_chamfer_with_budget,
    normalized_enhanced_chamfer, EcdOptions, METRIC_POINT_BUDGET,
};
pub use divergence::{
    category_kl, color_histogram, color_histogram_kl, kl_divergence, Smoothing, COLOR_BINS_PER_CHANNEL,
};
pub use physics::out_of_plane_rate;
pub use report::{object_key, MetricsReport, ObjectMetrics, SceneMetrics, REPORT_VERSION};
pub use retrieval::topk_accuracy;
