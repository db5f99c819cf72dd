//! Collision loss, layout optimization, and physical-attribute checks.

mod collision;
mod optimizer;
mod physical;

pub use collision::{box_collision_loss, collision_loss, graph_collision_loss};
pub use optimizer::{
    axis_moves, optimize_layout, Acceptance, Axis, AxisMove, MoveEvent, OptimizeResult, OptimizerConfig,
    DEFAULT_MAX_STEPS, DEFAULT_STEP_M,
};
pub use physical::{
    validate_physical_attributes, AttributeViolation, PhysicalAttributes, PhysicsCategory, VolumeClass, MAX_FRICTION,
    MEDIUM_VOLUME_M3, SMALL_VOLUME_M3,
};
