use crate::geometry::Aabb;
use crate::metrics::iou_or_zero;
use crate::scene::SceneLayout;
use crate::scene_graph::SceneGraph;

/// Sum of box IoU over all unordered object pairs.
pub fn collision_loss(scene: &SceneLayout) -> f64 {
    box_collision_loss(&scene.boxes())
}

pub fn box_collision_loss(boxes: &[Aabb]) -> f64 {
    let mut total = 0.0;
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            total += iou_or_zero(&boxes[i], &boxes[j]);
        }
    }
    total
}

/// Collision loss that skips pairs joined by a containment or embedding
/// relation, whose overlap is intended.
pub fn graph_collision_loss(scene: &SceneLayout, graph: &SceneGraph) -> f64 {
    PairIou::new(scene, graph).total()
}

/// Cached pairwise IoU with intended-overlap pairs masked out.
#[derive(Debug, Clone)]
pub(crate) struct PairIou {
    n: usize,
    masked: Vec<bool>,
    values: Vec<f64>,
}

impl PairIou {
    pub(crate) fn new(scene: &SceneLayout, graph: &SceneGraph) -> Self {
        let n = scene.objects.len();
        let mut masked = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                masked[i * n + j] = graph.interpenetration_allowed(&scene.objects[i].id, &scene.objects[j].id);
            }
        }
        let mut m = Self {
            n,
            masked,
            values: vec![0.0; n * n],
        };
        let boxes = scene.boxes();
        for i in 0..n {
            m.refresh(&boxes, i);
        }
        m
    }

    /// Recomputes row and column `i`.
    pub(crate) fn refresh(&mut self, boxes: &[Aabb], i: usize) {
        for j in 0..self.n {
            let v = if i == j || self.masked[i * self.n + j] {
                0.0
            } else {
                iou_or_zero(&boxes[i], &boxes[j])
            };
            self.values[i * self.n + j] = v;
            self.values[j * self.n + i] = v;
        }
    }

    /// Upper-triangle sum in row-major order, so the result does not depend
    /// on the update history.
    pub(crate) fn total(&self) -> f64 {
        let mut t = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                t += self.values[i * self.n + j];
            }
        }
        t
    }
}
