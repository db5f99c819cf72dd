//! Rule-based support / containment / embedding relations between boxes.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::scene::SceneLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Support,
    Containment,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Child bottom minus parent top (m).
    pub vertical_gap: f64,
    /// Share of the child's footprint lying over the parent's.
    pub overlap_ratio: f64,
    /// Share of the child's volume inside the parent. Containment measures
    /// against the inflated parent box, embedding against the raw one.
    pub volume_inside_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub parent: String,
    pub child: String,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphRules {
    pub support_gap_min: f64,
    pub support_gap_max: f64,
    pub support_overlap_min: f64,
    pub containment_ratio_min: f64,
    pub containment_margin: f64,
    pub embedding_ratio_min: f64,
    pub embedding_ratio_max: f64,
}

impl Default for GraphRules {
    fn default() -> Self {
        Self {
            support_gap_min: -0.01,
            support_gap_max: 0.02,
            support_overlap_min: 0.3,
            containment_ratio_min: 0.9,
            containment_margin: 0.02,
            embedding_ratio_min: 0.1,
            embedding_ratio_max: 0.9,
        }
    }
}

impl GraphRules {
    fn gap_ok(&self, gap: f64) -> bool {
        (self.support_gap_min..=self.support_gap_max).contains(&gap)
    }

    /// Support needs a small vertical gap, enough footprint overlap, and the
    /// child's center above the parent's (which also rules out cycles).
    pub fn supports(&self, parent: &Aabb, child: &Aabb) -> Option<Evidence> {
        let e = evidence(parent, child, self.containment_margin);
        (self.gap_ok(e.vertical_gap)
            && e.overlap_ratio >= self.support_overlap_min
            && child.center().z > parent.center().z)
            .then_some(e)
    }

    pub fn contains(&self, parent: &Aabb, child: &Aabb) -> Option<Evidence> {
        let e = evidence(parent, child, self.containment_margin);
        (e.volume_inside_ratio >= self.containment_ratio_min && parent.volume() > child.volume()).then_some(e)
    }

    /// Partial interpenetration, measured against the raw parent box.
    pub fn embeds(&self, parent: &Aabb, child: &Aabb) -> Option<Evidence> {
        let e = Evidence {
            volume_inside_ratio: inside_ratio(parent, child, 0.0),
            ..evidence(parent, child, self.containment_margin)
        };
        let r = e.volume_inside_ratio;
        (r > self.embedding_ratio_min && r < self.embedding_ratio_max).then_some(e)
    }

    pub fn on_floor(&self, child: &Aabb, floor_z: f64) -> bool {
        self.gap_ok(child.min.z - floor_z)
    }

    fn holds(&self, kind: RelationKind, parent: &Aabb, child: &Aabb) -> Option<Evidence> {
        match kind {
            RelationKind::Support => self.supports(parent, child),
            RelationKind::Containment => self.contains(parent, child),
            RelationKind::Embedding => self.embeds(parent, child),
        }
    }
}

fn inside_ratio(parent: &Aabb, child: &Aabb, margin: f64) -> f64 {
    let v = child.volume();
    if v <= 0.0 {
        return 0.0;
    }
    child.intersection_volume(&parent.inflated(margin)) / v
}

fn evidence(parent: &Aabb, child: &Aabb, margin: f64) -> Evidence {
    let fp = child.footprint();
    let area = fp.area();
    Evidence {
        vertical_gap: child.min.z - parent.max.z,
        overlap_ratio: if area > 0.0 {
            fp.overlap_area(&parent.footprint()) / area
        } else {
            0.0
        },
        volume_inside_ratio: inside_ratio(parent, child, margin),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<String>,
    pub relations: Vec<Relation>,
    /// Objects resting directly on the floor with no other supporter.
    #[serde(default)]
    pub grounded: Vec<String>,
    #[serde(default)]
    pub rules: GraphRules,
}

impl SceneGraph {
    pub fn parent_of(&self, child: &str, kind: RelationKind) -> Option<&str> {
        self.relations
            .iter()
            .find(|r| r.kind == kind && r.child == child)
            .map(|r| r.parent.as_str())
    }

    pub fn children_of(&self, parent: &str, kind: RelationKind) -> Vec<&str> {
        self.relations
            .iter()
            .filter(|r| r.kind == kind && r.parent == parent)
            .map(|r| r.child.as_str())
            .collect()
    }

    /// All objects reachable from `id` through relations of any kind,
    /// excluding `id` itself, in breadth-first order.
    pub fn descendants(&self, id: &str) -> Vec<String> {
        let mut seen = BTreeSet::from([id.to_string()]);
        let mut out = Vec::new();
        let mut frontier = vec![id.to_string()];
        while let Some(cur) = frontier.pop() {
            for r in self.relations.iter().filter(|r| r.parent == cur) {
                if seen.insert(r.child.clone()) {
                    out.push(r.child.clone());
                    frontier.insert(0, r.child.clone());
                }
            }
        }
        out
    }

    /// Whether the two objects are linked by a containment or embedding edge.
    pub fn interpenetration_allowed(&self, a: &str, b: &str) -> bool {
        self.relations.iter().any(|r| {
            matches!(r.kind, RelationKind::Containment | RelationKind::Embedding)
                && ((r.parent == a && r.child == b) || (r.parent == b && r.child == a))
        })
    }
}

pub fn build_scene_graph(scene: &SceneLayout) -> SceneGraph {
    build_scene_graph_with(scene, &GraphRules::default())
}

pub fn build_scene_graph_with(scene: &SceneLayout, rules: &GraphRules) -> SceneGraph {
    let boxes = scene.boxes();
    let ids: Vec<&str> = scene.objects.iter().map(|o| o.id.as_str()).collect();
    let n = boxes.len();

    // best parent per child: smallest |gap| for support, smallest volume for
    // containment; strict comparisons keep the lower index on ties
    let mut support: Vec<Option<(usize, Evidence)>> = vec![None; n];
    let mut contain: Vec<Option<(usize, Evidence)>> = vec![None; n];
    for c in 0..n {
        for p in (0..n).filter(|&p| p != c) {
            if let Some(e) = rules.supports(&boxes[p], &boxes[c]) {
                if support[c].is_none_or(|(_, b)| e.vertical_gap.abs() < b.vertical_gap.abs()) {
                    support[c] = Some((p, e));
                }
            }
            if let Some(e) = rules.contains(&boxes[p], &boxes[c]) {
                if contain[c].is_none_or(|(b, _)| boxes[p].volume() < boxes[b].volume()) {
                    contain[c] = Some((p, e));
                }
            }
        }
    }
    let grounded: Vec<bool> = (0..n)
        .map(|c| support[c].is_none() && rules.on_floor(&boxes[c], scene.floor_z))
        .collect();
    let linked = |a: usize, b: usize| {
        [&support, &contain]
            .iter()
            .any(|rel| rel[a].is_some_and(|(p, _)| p == b) || rel[b].is_some_and(|(p, _)| p == a))
    };
    let larger = |p: usize, c: usize| {
        let (vp, vc) = (boxes[p].volume(), boxes[c].volume());
        vp > vc || (vp == vc && p < c)
    };
    let mut embed: Vec<Option<(usize, Evidence)>> = vec![None; n];
    for c in (0..n).filter(|&c| !grounded[c]) {
        for p in (0..n).filter(|&p| p != c && larger(p, c) && !linked(p, c)) {
            if let Some(e) = rules.embeds(&boxes[p], &boxes[c]) {
                if embed[c].is_none_or(|(_, b)| e.volume_inside_ratio > b.volume_inside_ratio) {
                    embed[c] = Some((p, e));
                }
            }
        }
    }

    let mut relations = Vec::new();
    for c in 0..n {
        for (kind, slot) in [
            (RelationKind::Support, support[c]),
            (RelationKind::Containment, contain[c]),
            (RelationKind::Embedding, embed[c]),
        ] {
            if let Some((p, evidence)) = slot {
                relations.push(Relation {
                    kind,
                    parent: ids[p].to_string(),
                    child: ids[c].to_string(),
                    evidence,
                });
            }
        }
    }
    SceneGraph {
        nodes: ids.iter().map(|s| s.to_string()).collect(),
        relations,
        grounded: (0..n).filter(|&c| grounded[c]).map(|c| ids[c].to_string()).collect(),
        rules: *rules,
    }
}

/// A relation whose rule no longer holds. `parent == None` is the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: RelationKind,
    pub parent: Option<String>,
    pub child: String,
    pub evidence: Evidence,
}

/// Re-checks every relation (and floor contact of grounded objects) against
/// the scene's current boxes.
pub fn validate_graph(graph: &SceneGraph, scene: &SceneLayout) -> Result<Vec<Violation>> {
    let index: HashMap<&str, usize> = scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| (o.id.as_str(), i))
        .collect();
    let lookup = |id: &str| {
        index
            .get(id)
            .map(|&i| &scene.objects[i].bbox)
            .ok_or_else(|| Error::NotFound(format!("graph references unknown object '{id}'")))
    };
    for node in &graph.nodes {
        lookup(node)?;
    }
    let rules = &graph.rules;
    let mut out = Vec::new();
    for r in &graph.relations {
        let (p, c) = (lookup(&r.parent)?, lookup(&r.child)?);
        if rules.holds(r.kind, p, c).is_none() {
            out.push(Violation {
                kind: r.kind,
                parent: Some(r.parent.clone()),
                child: r.child.clone(),
                evidence: evidence(p, c, rules.containment_margin),
            });
        }
    }
    for g in &graph.grounded {
        let c = lookup(g)?;
        if !rules.on_floor(c, scene.floor_z) {
            out.push(Violation {
                kind: RelationKind::Support,
                parent: None,
                child: g.clone(),
                evidence: Evidence {
                    vertical_gap: c.min.z - scene.floor_z,
                    overlap_ratio: 1.0,
                    volume_inside_ratio: 0.0,
                },
            });
        }
    }
    Ok(out)
}
