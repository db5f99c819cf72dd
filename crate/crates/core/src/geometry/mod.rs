//! Point clouds, boxes, transforms, nearest-neighbor queries, curvature and
//! floor polygons.

mod aabb;
mod cloud;
mod curvature;
mod floor;
mod kdtree;
pub mod ply;
mod transform;

pub use aabb::{Aabb, Footprint};
pub use cloud::{farthest_point_indices, Color, PointCloud};
pub use curvature::{estimate_curvature, DEFAULT_CURVATURE_NEIGHBORS};
pub use floor::{convex_hull, estimate_floor_plan, FloorPlanMode, FloorPolygon, BOUNDARY_EPS};
pub(crate) use kdtree::nearest_distances_raw;
pub use kdtree::{nearest_distance, KdTree};
pub use transform::{normalize_yaw, rotate_z, PoseTransform};
