//! Floor polygons and the heuristic floor-plan estimate from object boxes.

use std::collections::BTreeMap;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::Aabb;
use crate::error::{Error, Result};

/// Tolerance for on-boundary tests, in meters.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Simple counterclockwise polygon on the ground plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFloor")]
pub struct FloorPolygon {
    vertices: Vec<Point2<f64>>,
}

#[derive(Deserialize)]
struct RawFloor {
    vertices: Vec<Point2<f64>>,
}

impl TryFrom<RawFloor> for FloorPolygon {
    type Error = Error;

    fn try_from(raw: RawFloor) -> Result<Self> {
        FloorPolygon::new(raw.vertices)
    }
}

impl FloorPolygon {
    /// Validates simplicity and positive area. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point2<f64>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Degenerate(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if !vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite()) {
            return Err(Error::InvalidInput("polygon vertices must be finite".into()));
        }
        let signed = signed_area(&vertices);
        if signed.abs() <= BOUNDARY_EPS {
            return Err(Error::Degenerate("polygon has zero area".into()));
        }
        if signed < 0.0 {
            vertices.reverse();
        }
        if !is_simple(&vertices) {
            return Err(Error::InvalidInput("polygon is self-intersecting".into()));
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(min: Point2<f64>, max: Point2<f64>) -> Result<Self> {
        Self::new(vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)])
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Point-in-polygon, counting points on an edge as inside.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if on_segment(p, &a, &b) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// True when every footprint corner of `bbox` lies inside (edges inclusive).
    pub fn contains_footprint(&self, bbox: &Aabb) -> bool {
        bbox.footprint().corners().iter().all(|c| self.contains(c))
    }
}

fn signed_area(v: &[Point2<f64>]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> bool {
    let len = (b - a).norm();
    if len == 0.0 {
        return (p - a).norm() <= BOUNDARY_EPS;
    }
    if (cross(a, b, p) / len).abs() > BOUNDARY_EPS {
        return false;
    }
    p.x >= a.x.min(b.x) - BOUNDARY_EPS
        && p.x <= a.x.max(b.x) + BOUNDARY_EPS
        && p.y >= a.y.min(b.y) - BOUNDARY_EPS
        && p.y <= a.y.max(b.y) + BOUNDARY_EPS
}

fn segments_cross(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>, d: &Point2<f64>) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

fn is_simple(v: &[Point2<f64>]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(&v[i], &v[(i + 1) % n], &v[j], &v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// How box footprints are turned into a floor region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorPlanMode {
    /// Convex hull of all footprint corners.
    #[default]
    Hull,
    /// Outer boundary of the union of footprints, for concave rooms.
    Union,
}

/// Floor region covering every object footprint.
pub fn estimate_floor_plan(objects: &[Aabb], mode: FloorPlanMode) -> Result<FloorPolygon> {
    if objects.is_empty() {
        return Err(Error::Precondition("floor plan needs at least one box".into()));
    }
    match mode {
        FloorPlanMode::Hull => hull_floor(objects),
        FloorPlanMode::Union => union_floor(objects),
    }
}

fn hull_floor(objects: &[Aabb]) -> Result<FloorPolygon> {
    let corners: Vec<Point2<f64>> = objects.iter().flat_map(|b| b.footprint().corners()).collect();
    let hull = convex_hull(corners);
    if hull.len() < 3 {
        return Err(Error::Degenerate(
            "footprint corners are collinear; hull has no area".into(),
        ));
    }
    FloorPolygon::new(hull)
}

/// Andrew's monotone chain; collinear points are dropped; output is CCW.
pub fn convex_hull(mut pts: Vec<Point2<f64>>) -> Vec<Point2<f64>> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Rectilinear outline of the footprint union. The footprints are rasterized
/// on their own compressed coordinate grid, boundary edges are chained into
/// loops, and the loop with the largest area is kept (holes are dropped).
fn union_floor(objects: &[Aabb]) -> Result<FloorPolygon> {
    let fps: Vec<_> = objects.iter().map(|b| b.footprint()).collect();
    if fps.iter().all(|f| f.area() <= 0.0) {
        return Err(Error::Degenerate("all footprints have zero area".into()));
    }
    let xs = sorted_unique(fps.iter().flat_map(|f| [f.min.x, f.max.x]));
    let ys = sorted_unique(fps.iter().flat_map(|f| [f.min.y, f.max.y]));
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let mut covered = vec![false; nx * ny];
    for f in fps.iter().filter(|f| f.area() > 0.0) {
        let x0 = xs.partition_point(|&x| x < f.min.x);
        let x1 = xs.partition_point(|&x| x < f.max.x);
        let y0 = ys.partition_point(|&y| y < f.min.y);
        let y1 = ys.partition_point(|&y| y < f.max.y);
        for i in x0..x1 {
            for j in y0..y1 {
                covered[i * ny + j] = true;
            }
        }
    }
    let cell = |i: isize, j: isize| -> bool {
        i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && covered[i as usize * ny + j as usize]
    };
    if count_components(nx, ny, &covered) > 1 {
        return Err(Error::Degenerate(
            "footprints form disconnected regions; union has no single outline".into(),
        ));
    }

    // Directed boundary edges with the covered cell on the left, keyed by
    // grid vertex (i, j).
    let mut edges: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..nx as isize {
        for j in 0..ny as isize {
            if !cell(i, j) {
                continue;
            }
            let (iu, ju) = (i as usize, j as usize);
            if !cell(i, j - 1) {
                edges.entry((iu, ju)).or_default().push((iu + 1, ju));
            }
            if !cell(i + 1, j) {
                edges.entry((iu + 1, ju)).or_default().push((iu + 1, ju + 1));
            }
            if !cell(i, j + 1) {
                edges.entry((iu + 1, ju + 1)).or_default().push((iu, ju + 1));
            }
            if !cell(i - 1, j) {
                edges.entry((iu, ju + 1)).or_default().push((iu, ju));
            }
        }
    }

    let mut loops: Vec<Vec<(usize, usize)>> = Vec::new();
    while let Some((&start, _)) = edges.iter().find(|(_, v)| !v.is_empty()) {
        let mut ring = vec![start];
        let mut prev = start;
        let mut cur = take_edge(&mut edges, start, None);
        while cur != start {
            ring.push(cur);
            let next = take_edge(&mut edges, cur, Some(prev));
            prev = cur;
            cur = next;
        }
        loops.push(ring);
    }

    let to_pts = |ring: &[(usize, usize)]| -> Vec<Point2<f64>> {
        ring.iter().map(|&(i, j)| Point2::new(xs[i], ys[j])).collect()
    };
    let outer = loops
        .iter()
        .map(|r| to_pts(r))
        .max_by(|a, b| signed_area(a).total_cmp(&signed_area(b)))
        .ok_or_else(|| Error::Degenerate("union outline is empty".into()))?;
    let poly = FloorPolygon::new(drop_collinear(outer))?;
    if !objects.iter().all(|b| poly.contains_footprint(b)) {
        return Err(Error::Degenerate("union outline does not cover every footprint".into()));
    }
    Ok(poly)
}

/// Removes the outgoing edge to follow from `at`. At a pinch vertex the
/// sharpest left turn is taken, which keeps each traced loop simple.
fn take_edge(
    edges: &mut BTreeMap<(usize, usize), Vec<(usize, usize)>>,
    at: (usize, usize),
    came_from: Option<(usize, usize)>,
) -> (usize, usize) {
    let outs = edges.get_mut(&at).expect("boundary edges always chain");
    let pick = match came_from {
        Some(prev) if outs.len() > 1 => {
            let dir_in = (at.0 as isize - prev.0 as isize, at.1 as isize - prev.1 as isize);
            let left = (-dir_in.1.signum(), dir_in.0.signum());
            outs.iter()
                .position(|o| {
                    let d = (o.0 as isize - at.0 as isize, o.1 as isize - at.1 as isize);
                    (d.0.signum(), d.1.signum()) == left
                })
                .unwrap_or(0)
        }
        _ => 0,
    };
    outs.remove(pick)
}

fn count_components(nx: usize, ny: usize, covered: &[bool]) -> usize {
    let mut seen = vec![false; covered.len()];
    let mut components = 0;
    for start in 0..covered.len() {
        if !covered[start] || seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(c) = stack.pop() {
            let (i, j) = (c / ny, c % ny);
            let mut push = |ii: usize, jj: usize| {
                let k = ii * ny + jj;
                if covered[k] && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < nx {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < ny {
                push(i, j + 1);
            }
        }
    }
    components
}

fn sorted_unique(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = vals.collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn drop_collinear(pts: Vec<Point2<f64>>) -> Vec<Point2<f64>> {
    let n = pts.len();
    (0..n)
        .filter(|&i| {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            cross(&prev, &pts[i], &next).abs() > 0.0
        })
        .map(|i| pts[i])
        .collect()
}
