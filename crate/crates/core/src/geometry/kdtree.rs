//! Exact nearest-neighbor queries over 3D point sets.
//!
//! The tree is a balanced implicit kd-tree stored as a permutation of point
//! indices: the median of every sub-range is the node, its halves the
//! children. Queries return exact results; distances are computed with the
//! same arithmetic as a brute-force scan so both paths agree bit-for-bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

use super::PointCloud;
use crate::error::Result;

/// Below this many target points a linear scan beats building a tree.
const BRUTE_FORCE_LIMIT: usize = 64;

#[inline]
fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

pub struct KdTree<'a> {
    points: &'a [Point3<f64>],
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build_range(points, &mut order, 0);
        Self { points, order }
    }

    /// Index and squared distance of the closest point, or `None` when empty.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        if self.order.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(q, 0, self.order.len(), 0, &mut best);
        Some(best)
    }

    fn nearest_in(&self, q: &Point3<f64>, lo: usize, hi: usize, depth: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d = dist2(q, p);
        if d < best.1 || (d == best.1 && idx < best.0) {
            *best = (idx, d);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(q, near.0, near.1, depth + 1, best);
        if diff * diff <= best.1 {
            self.nearest_in(q, far.0, far.1, depth + 1, best);
        }
    }

    /// The `k` closest points as `(index, squared distance)`, nearest first;
    /// equal distances order by index.
    pub fn k_nearest(&self, q: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(q, k, 0, self.order.len(), 0, &mut heap);
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.index, c.dist2)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn knn_in(&self, q: &Point3<f64>, k: usize, lo: usize, hi: usize, depth: usize, heap: &mut BinaryHeap<Candidate>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let cand = Candidate {
            dist2: dist2(q, p),
            index: idx,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().expect("heap holds k items") {
            heap.pop();
            heap.push(cand);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_in(q, k, near.0, near.1, depth + 1, heap);
        let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist2);
        if heap.len() < k || diff * diff <= worst {
            self.knn_in(q, k, far.0, far.1, depth + 1, heap);
        }
    }
}

fn build_range(points: &[Point3<f64>], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build_range(points, left, depth + 1);
    build_range(points, &mut right[1..], depth + 1);
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

/// Euclidean distance from every query point to its nearest target point.
pub fn nearest_distance(query: &PointCloud, target: &PointCloud) -> Result<Vec<f64>> {
    query.require_non_empty("query")?;
    target.require_non_empty("target")?;
    Ok(nearest_distances_raw(query.points(), target.points()))
}

pub(crate) fn nearest_distances_raw(query: &[Point3<f64>], target: &[Point3<f64>]) -> Vec<f64> {
    if target.len() <= BRUTE_FORCE_LIMIT {
        return query
            .iter()
            .map(|q| target.iter().map(|t| dist2(q, t)).fold(f64::INFINITY, f64::min).sqrt())
            .collect();
    }
    let tree = KdTree::build(target);
    query
        .iter()
        .map(|q| tree.nearest(q).map_or(f64::INFINITY, |(_, d)| d.sqrt()))
        .collect()
}
