//! Uniform-grid point index for fixed-radius nearest-neighbor queries.

use rustc_hash::FxHashMap;

use crate::layout::Point;

/// Below this many points, queries scan every point instead of the grid.
/// They also do so whenever the grid cells to visit outnumber the points.
pub const LINEAR_SCAN_MAX: usize = 32;

const ABSENT: usize = usize::MAX;

/// Dynamic set of UE indices with positions, bucketed on a square grid.
///
/// Indices are bounded by the capacity given at construction. Queries use
/// the closed ball `d ≤ radius` and break distance ties by smallest index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size: f64,
    buckets: FxHashMap<(i64, i64), Vec<usize>>,
    members: Vec<(usize, Point)>,
    slot: Vec<usize>,
}

impl SpatialIndex {
    /// Nonpositive or non-finite `cell_size` falls back to 1 m.
    pub fn new(cell_size: f64, capacity: usize) -> Self {
        let cell_size = if cell_size > 0.0 && cell_size.is_finite() {
            cell_size
        } else {
            1.0
        };
        Self {
            cell_size,
            buckets: FxHashMap::default(),
            members: Vec::new(),
            slot: vec![ABSENT; capacity],
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.slot.get(index).is_some_and(|&s| s != ABSENT)
    }

    fn key(&self, p: Point) -> (i64, i64) {
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
        )
    }

    /// Adds `index` at `p`. Re-inserting a present index is a no-op.
    pub fn insert(&mut self, index: usize, p: Point) {
        if self.contains(index) {
            return;
        }
        if index >= self.slot.len() {
            self.slot.resize(index + 1, ABSENT);
        }
        self.slot[index] = self.members.len();
        self.members.push((index, p));
        let key = self.key(p);
        self.buckets.entry(key).or_default().push(index);
    }

    /// Removes `index`; returns whether it was present.
    pub fn remove(&mut self, index: usize) -> bool {
        if !self.contains(index) {
            return false;
        }
        let s = self.slot[index];
        let (_, p) = self.members.swap_remove(s);
        if let Some(&(moved, _)) = self.members.get(s) {
            self.slot[moved] = s;
        }
        self.slot[index] = ABSENT;
        let key = self.key(p);
        if let Some(bucket) = self.buckets.get_mut(&key) {
            if let Some(pos) = bucket.iter().position(|&i| i == index) {
                bucket.swap_remove(pos);
            }
            if bucket.is_empty() {
                self.buckets.remove(&key);
            }
        }
        true
    }

    fn position(&self, index: usize) -> Point {
        self.members[self.slot[index]].1
    }

    // Calls `visit(index, position)` for every member that might lie within `radius`.
    fn for_each_candidate<F: FnMut(usize, Point)>(&self, query: Point, radius: f64, mut visit: F) {
        let lo = self.key(Point::new(query.x - radius, query.y - radius));
        let hi = self.key(Point::new(query.x + radius, query.y + radius));
        let cells = (hi.0 - lo.0 + 1) as f64 * (hi.1 - lo.1 + 1) as f64;
        if self.members.len() <= LINEAR_SCAN_MAX || cells >= self.members.len() as f64 {
            for &(i, p) in &self.members {
                visit(i, p);
            }
            return;
        }
        for gx in lo.0..=hi.0 {
            for gy in lo.1..=hi.1 {
                if let Some(bucket) = self.buckets.get(&(gx, gy)) {
                    for &i in bucket {
                        visit(i, self.position(i));
                    }
                }
            }
        }
    }

    /// Nearest member within the closed ball of `radius` around `query`.
    ///
    /// Scans rings of grid cells outward from the query cell and stops once
    /// no unvisited cell can hold a closer point.
    pub fn nearest(&self, query: Point, radius: f64) -> Option<(usize, f64)> {
        let r2 = radius * radius;
        let mut best: Option<(f64, usize)> = None;
        let consider = |best: &mut Option<(f64, usize)>, i: usize, p: Point| {
            let d2 = query.distance_sq(&p);
            if d2 <= r2 && best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && i < bi)) {
                *best = Some((d2, i));
            }
        };
        let max_ring = (radius / self.cell_size).ceil() as i64 + 1;
        let cells = (2 * max_ring + 1) as f64 * (2 * max_ring + 1) as f64;
        if self.members.len() <= LINEAR_SCAN_MAX || cells >= self.members.len() as f64 {
            for &(i, p) in &self.members {
                consider(&mut best, i, p);
            }
        } else {
            let (cx, cy) = self.key(query);
            for k in 0..=max_ring {
                for (gx, gy) in ring(cx, cy, k) {
                    if let Some(bucket) = self.buckets.get(&(gx, gy)) {
                        for &i in bucket {
                            consider(&mut best, i, self.position(i));
                        }
                    }
                }
                // Points in ring k + 1 are at least k cell widths away.
                let reach = k as f64 * self.cell_size;
                if best.is_some_and(|(bd, _)| bd < reach * reach) {
                    break;
                }
            }
        }
        best.map(|(_, i)| (i, query.distance(&self.position(i))))
    }

    /// All members within the closed ball, in ascending index order.
    pub fn within(&self, query: Point, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_each_candidate(query, radius, |i, p| {
            if query.distance_sq(&p) <= r2 {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }
}

// Grid cells at Chebyshev distance `k` from `(cx, cy)`.
fn ring(cx: i64, cy: i64, k: i64) -> impl Iterator<Item = (i64, i64)> {
    let side = (-k..=k).flat_map(move |j| {
        let edges = if k == 0 {
            vec![(cx, cy)]
        } else {
            vec![(cx + j, cy - k), (cx + j, cy + k)]
        };
        edges.into_iter()
    });
    let columns = (-k + 1..k).flat_map(move |j| [(cx - k, cy + j), (cx + k, cy + j)]);
    side.chain(columns)
}
