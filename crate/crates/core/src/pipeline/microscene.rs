use crate::category::CategoryMap;
use crate::error::Result;
use crate::geometry::FloorPolygon;
use crate::metrics::out_of_plane_rate;
use crate::scene::{LargeObject, MicroScene, SceneLayout, SmallObject};
use crate::scene_graph::{RelationKind, SceneGraph};

/// Most objects a micro-scene may hold, the large object included.
pub const MAX_MICROSCENE_OBJECTS: usize = 24;

/// One micro-scene per large-category object that supports at least one
/// other object. Children keep layout order; past the cap the smallest boxes
/// by volume are dropped.
pub fn extract_microscenes(layout: &SceneLayout, graph: &SceneGraph, map: &CategoryMap) -> Vec<MicroScene> {
    let mut out = Vec::new();
    for parent in &layout.objects {
        if !map.is_large(&parent.category) {
            continue;
        }
        let child_ids = graph.children_of(&parent.id, RelationKind::Support);
        let mut children: Vec<(usize, &crate::scene::SceneObject)> = layout
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| child_ids.contains(&o.id.as_str()))
            .collect();
        if children.is_empty() {
            continue;
        }
        let keep = MAX_MICROSCENE_OBJECTS - 1;
        if children.len() > keep {
            // Largest first, ties to the earlier object, then back to layout order.
            children.sort_by(|a, b| b.1.bbox.volume().total_cmp(&a.1.bbox.volume()).then(a.0.cmp(&b.0)));
            children.truncate(keep);
            children.sort_by_key(|c| c.0);
        }
        let fp = parent.bbox.footprint();
        let top_surface = FloorPolygon::rectangle(fp.min, fp.max).ok().filter(|p| p.area() > 0.0);
        out.push(MicroScene {
            large_object: LargeObject {
                id: parent.id.clone(),
                category: map.merge(&parent.category),
                bbox: parent.bbox,
                top_surface,
            },
            small_objects: children
                .into_iter()
                .map(|(_, o)| SmallObject {
                    id: o.id.clone(),
                    category: map.merge(&o.category),
                    bbox: o.bbox,
                })
                .collect(),
        });
    }
    out
}

/// Out-of-plane rate over all small objects of all micro-scenes together.
/// `None` when there are no micro-scenes with a top surface.
pub fn pooled_out_of_plane_rate(micro: &[MicroScene]) -> Result<Option<f64>> {
    let mut outside = 0.0;
    let mut total = 0usize;
    for m in micro.iter().filter(|m| m.large_object.top_surface.is_some()) {
        outside += (out_of_plane_rate(m)? * m.small_objects.len() as f64).round();
        total += m.small_objects.len();
    }
    Ok(if total == 0 { None } else { Some(outside / total as f64) })
}
