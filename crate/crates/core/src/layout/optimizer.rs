use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::collision::PairIou;
use crate::error::{Error, Result};
use crate::geometry::FloorPolygon;
use crate::scene::SceneLayout;
use crate::scene_graph::{validate_graph, SceneGraph};

pub const DEFAULT_STEP_M: f64 = 0.05;
pub const DEFAULT_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// A signed horizontal translation along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMove {
    pub axis: Axis,
    pub delta: f64,
}

impl AxisMove {
    fn vector(&self) -> Vector3<f64> {
        match self.axis {
            Axis::X => Vector3::new(self.delta, 0.0, 0.0),
            Axis::Y => Vector3::new(0.0, self.delta, 0.0),
        }
    }
}

/// `+x, −x, +y, −y` with the given step.
pub fn axis_moves(step: f64) -> Vec<AxisMove> {
    vec![
        AxisMove {
            axis: Axis::X,
            delta: step,
        },
        AxisMove {
            axis: Axis::X,
            delta: -step,
        },
        AxisMove {
            axis: Axis::Y,
            delta: step,
        },
        AxisMove {
            axis: Axis::Y,
            delta: -step,
        },
    ]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Acceptance {
    /// Keep a move only when it lowers the best loss so far.
    #[default]
    Greedy,
    /// Also keep worsening moves with probability `exp(−ΔL / T)`; `T` is
    /// multiplied by `decay` after every sweep. The best state is returned.
    Metropolis { temperature: f64, decay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_steps: usize,
    pub moves: Vec<AxisMove>,
    pub seed: u64,
    /// Falls back to the scene's floor polygon when absent.
    pub boundary: Option<FloorPolygon>,
    pub acceptance: Acceptance,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            moves: axis_moves(DEFAULT_STEP_M),
            seed: 0,
            boundary: None,
            acceptance: Acceptance::Greedy,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be at least 1".into()));
        }
        if self.moves.is_empty() {
            return Err(Error::InvalidInput("move set is empty".into()));
        }
        if self.moves.iter().any(|m| !m.delta.is_finite() || m.delta == 0.0) {
            return Err(Error::InvalidInput("move steps must be finite and non-zero".into()));
        }
        if let Acceptance::Metropolis { temperature, decay } = self.acceptance {
            if !(temperature > 0.0 && decay > 0.0 && decay <= 1.0) {
                return Err(Error::InvalidInput(
                    "metropolis needs temperature > 0 and decay in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One attempted move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveEvent {
    pub step: usize,
    pub object_moved: String,
    pub accepted: bool,
    /// Best loss after the attempt.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub scene: SceneLayout,
    /// Initial loss, then the best loss after every sweep.
    pub trace: Vec<f64>,
    pub events: Vec<MoveEvent>,
    pub final_loss: f64,
}

impl OptimizeResult {
    pub fn events_csv(&self) -> String {
        let mut out = String::from("step,object_moved,accepted,loss\n");
        for e in &self.events {
            out.push_str(&format!("{},{},{},{}\n", e.step, e.object_moved, e.accepted, e.loss));
        }
        out
    }
}

/// Sweeps over objects applying random axis moves, keeping those that lower
/// the collision loss without leaving the boundary or breaking a relation.
///
/// Each object moves together with everything it supports, contains, or
/// embeds, so those relations stay intact by construction.
pub fn optimize_layout(scene: &SceneLayout, graph: &SceneGraph, cfg: &OptimizerConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    let boundary = cfg
        .boundary
        .clone()
        .or_else(|| scene.floor.clone())
        .ok_or_else(|| Error::Precondition(format!("scene '{}' has no boundary polygon", scene.scene_id)))?;
    let initial = validate_graph(graph, scene)?;
    if !initial.is_empty() {
        return Err(Error::InvalidInput(format!(
            "scene graph has {} violated relations before optimization",
            initial.len()
        )));
    }
    let groups: Vec<Vec<usize>> = scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let mut g = vec![i];
            g.extend(graph.descendants(&o.id).iter().filter_map(|d| scene.index_of(d)));
            g
        })
        .collect();

    let mut state = scene.clone();
    let mut boxes = state.boxes();
    let mut pairs = PairIou::new(&state, graph);
    let mut current = pairs.total();
    let mut best = current;
    let mut best_state = scene.clone();
    let mut trace = vec![best];
    let mut events = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut temperature = match cfg.acceptance {
        Acceptance::Metropolis { temperature, .. } => temperature,
        Acceptance::Greedy => 0.0,
    };

    let mut step = 0;
    while best > 0.0 && step < cfg.max_steps {
        for i in 0..state.objects.len() {
            let mv = cfg.moves[rng.gen_range(0..cfg.moves.len())];
            let delta = mv.vector();
            let group = &groups[i];
            let saved: Vec<_> = group.iter().map(|&k| state.objects[k].clone()).collect();
            for &k in group {
                state.objects[k].translate(&delta);
            }
            let mut accepted = false;
            if group
                .iter()
                .all(|&k| boundary.contains_footprint(&state.objects[k].bbox))
                && validate_graph(graph, &state)?.is_empty()
            {
                let mut trial = pairs.clone();
                for &k in group {
                    boxes[k] = state.objects[k].bbox;
                }
                for &k in group {
                    trial.refresh(&boxes, k);
                }
                let candidate = trial.total();
                accepted = match cfg.acceptance {
                    Acceptance::Greedy => candidate < best,
                    Acceptance::Metropolis { .. } => {
                        candidate < current || rng.gen::<f64>() < (-(candidate - current) / temperature).exp()
                    }
                };
                if accepted {
                    pairs = trial;
                    current = candidate;
                }
            }
            if accepted {
                if current < best {
                    best = current;
                    if matches!(cfg.acceptance, Acceptance::Metropolis { .. }) {
                        best_state = state.clone();
                    }
                }
            } else {
                for (&k, obj) in group.iter().zip(saved) {
                    boxes[k] = obj.bbox;
                    state.objects[k] = obj;
                }
            }
            events.push(MoveEvent {
                step,
                object_moved: state.objects[i].id.clone(),
                accepted,
                loss: best,
            });
            if best == 0.0 {
                break;
            }
        }
        step += 1;
        if let Acceptance::Metropolis { decay, .. } = cfg.acceptance {
            temperature *= decay;
        }
        trace.push(best);
    }

    Ok(OptimizeResult {
        scene: match cfg.acceptance {
            Acceptance::Greedy => state,
            Acceptance::Metropolis { .. } => best_state,
        },
        trace,
        events,
        final_loss: best,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{HashSet, VecDeque};

    use nalgebra::{Point2, Point3};
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::geometry::Aabb;
    use crate::layout::{collision_loss, graph_collision_loss};
    use crate::scene::SceneObject;
    use crate::scene_graph::build_scene_graph;

    fn bx(min: [f64; 3], size: [f64; 3]) -> Aabb {
        Aabb::from_min_size(Point3::from(min), Vector3::from(size)).unwrap()
    }

    fn floor(w: f64) -> FloorPolygon {
        FloorPolygon::rectangle(Point2::new(0.0, 0.0), Point2::new(w, w)).unwrap()
    }

    fn scene(boxes: Vec<Aabb>) -> SceneLayout {
        SceneLayout::new(
            "s",
            boxes
                .into_iter()
                .enumerate()
                .map(|(i, b)| SceneObject::new(format!("o{i}"), "object", b))
                .collect(),
        )
        .with_floor(floor(10.0))
    }

    #[test]
    fn collision_free_scene_is_untouched() {
        let s = scene(vec![bx([1.0, 1.0, 0.0], [1.0; 3]), bx([3.0, 1.0, 0.0], [1.0; 3])]);
        let r = optimize_layout(&s, &build_scene_graph(&s), &OptimizerConfig::default()).unwrap();
        assert_eq!(r.scene, s);
        assert_eq!(r.trace, vec![0.0]);
        assert!(r.events.is_empty());
    }

    /// Fewest axis moves of `step` that bring a unit cube offset by
    /// `offset` steps out of overlap with a fixed unit cube.
    fn grid_oracle(offset: (i32, i32), step: f64) -> usize {
        let overlaps = |x: i32, y: i32| (x as f64 * step).abs() < 1.0 - 1e-9 && (y as f64 * step).abs() < 1.0 - 1e-9;
        let mut seen = HashSet::from([offset]);
        let mut queue = VecDeque::from([(offset, 0usize)]);
        while let Some(((x, y), d)) = queue.pop_front() {
            if !overlaps(x, y) {
                return d;
            }
            for n in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                if seen.insert(n) {
                    queue.push_back((n, d + 1));
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn two_overlapping_cubes_separate() {
        assert!(grid_oracle((5, 0), 0.1) <= 500);
        let s = scene(vec![bx([4.0, 4.0, 0.0], [1.0; 3]), bx([4.5, 4.0, 0.0], [1.0; 3])]);
        let cfg = OptimizerConfig {
            max_steps: 500,
            moves: axis_moves(0.1),
            seed: 3,
            ..Default::default()
        };
        let r = optimize_layout(&s, &build_scene_graph(&s), &cfg).unwrap();
        assert_eq!(r.final_loss, 0.0);
        assert_eq!(collision_loss(&r.scene), 0.0);
        assert!((r.trace[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn supported_cup_moves_with_table() {
        let s = scene(vec![
            bx([4.0, 4.0, 0.0], [1.0, 1.0, 0.75]),
            bx([4.4, 4.4, 0.75], [0.1, 0.1, 0.12]),
            bx([4.6, 4.0, 0.0], [0.6, 0.6, 0.6]),
        ]);
        let g = build_scene_graph(&s);
        assert_eq!(g.relations.len(), 1);
        let cfg = OptimizerConfig {
            seed: 11,
            ..Default::default()
        };
        let r = optimize_layout(&s, &g, &cfg).unwrap();
        assert_eq!(r.final_loss, 0.0);
        // replay every accepted state through the validator
        let mut replay = s.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let groups = [vec![0usize, 1], vec![1], vec![2]];
        for e in &r.events {
            let i = replay.index_of(&e.object_moved).unwrap();
            let mv = cfg.moves[rng.gen_range(0..cfg.moves.len())];
            if e.accepted {
                for &k in &groups[i] {
                    replay.objects[k].translate(&mv.vector());
                }
                assert!(validate_graph(&g, &replay).unwrap().is_empty());
            }
        }
        assert_eq!(replay.boxes(), r.scene.boxes());
    }

    #[test]
    fn boundary_and_config_errors() {
        let mut s = scene(vec![bx([0.0, 0.0, 0.0], [1.0; 3]), bx([0.5, 0.0, 0.0], [1.0; 3])]);
        let g = build_scene_graph(&s);
        let empty = OptimizerConfig {
            moves: vec![],
            ..Default::default()
        };
        assert!(optimize_layout(&s, &g, &empty).is_err());
        let r = optimize_layout(&s, &g, &OptimizerConfig::default()).unwrap();
        let fl = floor(10.0);
        assert!(r.scene.objects.iter().all(|o| fl.contains_footprint(&o.bbox)));
        s.floor = None;
        assert!(optimize_layout(&s, &g, &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let boxes: Vec<Aabb> = (0..8)
            .map(|_| bx([rng.gen_range(3.0..5.0), rng.gen_range(3.0..5.0), 0.0], [0.6, 0.5, 0.7]))
            .collect();
        let s = scene(boxes);
        let g = build_scene_graph(&s);
        let cfg = OptimizerConfig {
            seed: 5,
            ..Default::default()
        };
        let a = optimize_layout(&s, &g, &cfg).unwrap();
        let b = optimize_layout(&s, &g, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.scene).unwrap(),
            serde_json::to_string(&b.scene).unwrap()
        );
        assert_eq!(a.events_csv(), b.events_csv());
        assert!(a.events_csv().starts_with("step,object_moved,accepted,loss\n"));
        assert_eq!(a.final_loss, graph_collision_loss(&a.scene, &g));
    }

    #[test]
    fn metropolis_returns_best_state() {
        let s = scene(vec![
            bx([4.0, 4.0, 0.0], [1.0; 3]),
            bx([4.5, 4.2, 0.0], [1.0; 3]),
            bx([4.2, 4.6, 0.0], [0.8; 3]),
        ]);
        let g = build_scene_graph(&s);
        let cfg = OptimizerConfig {
            seed: 2,
            acceptance: Acceptance::Metropolis {
                temperature: 0.05,
                decay: 0.95,
            },
            ..Default::default()
        };
        let r = optimize_layout(&s, &g, &cfg).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(graph_collision_loss(&r.scene, &g), r.final_loss);
        assert!(r.final_loss < r.trace[0]);
    }
}
