// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Uniform-grid neighbor search shared by the separation checks.

use std::collections::HashMap;

use crate::formation::Point3;

type CellKey = [i64; 3];

fn cell_of(p: &Point3, cell: f64) -> CellKey {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

/// Calls `visit(i, j, distance)` for every pair `i < j` closer than or equal to
/// `radius`. Pairs are visited in ascending `(i, j)` order.
pub(crate) fn pairs_within(points: &[Point3], radius: f64, mut visit: impl FnMut(usize, usize, f64)) {
    if points.len() < 2 {
        return;
    }
    // Cell list sorted by key: the z-neighbors of one (x, y) column of cells
    // form a contiguous run, found by binary search.
    let mut sorted: Vec<(CellKey, usize)> = points.iter().enumerate().map(|(i, p)| (cell_of(p, radius), i)).collect();
    sorted.sort_unstable();
    let mut neighbors = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let [cx, cy, cz] = cell_of(p, radius);
        neighbors.clear();
        for dx in -1..=1 {
            for dy in -1..=1 {
                let lo = [cx + dx, cy + dy, cz - 1];
                let hi = [cx + dx, cy + dy, cz + 1];
                let from = sorted.partition_point(|(k, _)| *k < lo);
                let to = from + sorted[from..].partition_point(|(k, _)| *k <= hi);
                neighbors.extend(sorted[from..to].iter().map(|&(_, j)| j).filter(|&j| j > i));
            }
        }
        neighbors.sort_unstable();
        for &j in &neighbors {
            let d = p.distance(&points[j]);
            if d <= radius {
                visit(i, j, d);
            }
        }
    }
}

/// Grid that accepts points one at a time and answers "is anything within
/// `radius` of this location".
pub(crate) struct IncrementalGrid {
    radius: f64,
    cells: HashMap<CellKey, Vec<Point3>>,
}

impl IncrementalGrid {
    pub(crate) fn new(radius: f64) -> Self {
        Self {
            radius,
            cells: HashMap::new(),
        }
    }

    pub(crate) fn is_clear(&self, p: &Point3) -> bool {
        let [cx, cy, cz] = cell_of(p, self.radius);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(members) = self.cells.get(&[cx + dx, cy + dy, cz + dz]) {
                        if members.iter().any(|q| q.distance(p) < self.radius) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub(crate) fn insert(&mut self, p: Point3) {
        self.cells.entry(cell_of(&p, self.radius)).or_default().push(p);
    }
}
