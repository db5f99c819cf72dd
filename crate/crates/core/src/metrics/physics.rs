use crate::error::{Error, Result};
use crate::scene::MicroScene;

/// Fraction of small objects whose footprint center falls outside the large
/// object's top surface. Centers on the outline count as inside.
pub fn out_of_plane_rate(micro: &MicroScene) -> Result<f64> {
    let top = micro.large_object.top_surface.as_ref().ok_or_else(|| {
        Error::Precondition(format!(
            "large object '{}' has no top-surface footprint",
            micro.large_object.id
        ))
    })?;
    if micro.small_objects.is_empty() {
        return Ok(0.0);
    }
    let outside = micro
        .small_objects
        .iter()
        .filter(|s| !top.contains(&s.bbox.footprint().center()))
        .count();
    Ok(outside as f64 / micro.small_objects.len() as f64)
}
