// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Drone-to-goal assignment.
//!
//! Costs are squared start-to-goal distances, which favors assignments whose
//! straight-line transits have the smallest total squared velocity. The
//! rectangular problem (more drones than goals) is padded to a square one
//! with zero-cost dummy goals; drones matched to a dummy stay idle.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formation::PointCloud;
use crate::{Error, Result};

/// Largest instance [`brute_force_lap`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Dense `n_drones x n_goals` cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n_drones: usize,
    n_goals: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_drones = rows.len();
        let n_goals = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_goals) {
            return Err(Error::InvalidInput("cost matrix rows have different lengths".into()));
        }
        Self::from_flat(n_drones, n_goals, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(n_drones: usize, n_goals: usize, entries: Vec<f64>) -> Result<Self> {
        if n_goals == 0 {
            return Err(Error::InvalidInput("cost matrix needs at least one goal".into()));
        }
        if n_drones < n_goals {
            return Err(Error::InsufficientDrones {
                drones: n_drones,
                goals: n_goals,
            });
        }
        if entries.len() != n_drones * n_goals {
            return Err(Error::InvalidInput(format!(
                "expected {} entries, got {}",
                n_drones * n_goals,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidInput(format!("cost entry {bad} is not a finite non-negative number")));
        }
        Ok(Self {
            n_drones,
            n_goals,
            entries,
        })
    }

    pub fn n_drones(&self) -> usize {
        self.n_drones
    }

    pub fn n_goals(&self) -> usize {
        self.n_goals
    }

    pub fn get(&self, drone: usize, goal: usize) -> f64 {
        self.entries[drone * self.n_goals + goal]
    }

    pub fn row(&self, drone: usize) -> &[f64] {
        &self.entries[drone * self.n_goals..(drone + 1) * self.n_goals]
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_flat(self.n_drones, self.n_goals, self.entries.iter().map(|c| c * factor).collect())
    }

    /// Debug dump: one row per drone, one column per goal.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n_drones {
            let row: Vec<String> = self.row(i).iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Result of solving the assignment problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Goal index for each drone; `None` marks an idle drone.
    pub drone_to_goal: Vec<Option<usize>>,
    pub total_cost: f64,
}

impl Assignment {
    fn from_mapping(costs: &CostMatrix, drone_to_goal: Vec<Option<usize>>) -> Self {
        let total_cost = drone_to_goal
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.map(|j| costs.get(i, j)))
            .sum();
        Self {
            drone_to_goal,
            total_cost,
        }
    }

    pub fn idle_drones(&self) -> Vec<usize> {
        (0..self.drone_to_goal.len())
            .filter(|&i| self.drone_to_goal[i].is_none())
            .collect()
    }

    /// Drone serving each goal. Panics if a goal is uncovered, which a
    /// solver result never is.
    pub fn goal_to_drone(&self, n_goals: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n_goals];
        for (i, g) in self.drone_to_goal.iter().enumerate() {
            if let Some(j) = g {
                out[*j] = i;
            }
        }
        assert!(out.iter().all(|&d| d != usize::MAX), "assignment does not cover every goal");
        out
    }
}

/// Squared Euclidean distance from every start to every goal.
pub fn build_cost_matrix(starts: &PointCloud, goals: &PointCloud) -> Result<CostMatrix> {
    let (n, m) = (starts.len(), goals.len());
    if m == 0 {
        return Err(Error::EmptyFormation("no goals to assign".into()));
    }
    if n < m {
        return Err(Error::InsufficientDrones { drones: n, goals: m });
    }
    let mut entries = vec![0.0; n * m];
    entries
        .par_chunks_mut(m)
        .zip(starts.points.par_iter())
        .for_each(|(row, s)| {
            for (cell, g) in row.iter_mut().zip(&goals.points) {
                *cell = s.distance_squared(g);
            }
        });
    CostMatrix::from_flat(n, m, entries)
}

/// Optimal assignment by the Hungarian method (shortest augmenting paths with
/// dual potentials), `O(n^3)` for `n = n_drones`.
///
/// Each drone in turn is matched by a Dijkstra search over reduced costs
/// that scans only the goals not yet reached; potentials are updated once
/// per augmentation.
pub fn solve_lap(costs: &CostMatrix) -> Assignment {
    let n = costs.n_drones;
    let m = costs.n_goals;
    // Square it up with zero-cost dummy goals; a drone matched to one is idle.
    let mut square = vec![0.0f64; n * n];
    for (row, chunk) in square.chunks_exact_mut(n).enumerate() {
        chunk[..m].copy_from_slice(costs.row(row));
    }

    const NONE: usize = usize::MAX;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col_of_row = vec![NONE; n];
    let mut row_of_col = vec![NONE; n];
    let mut path = vec![NONE; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut visited_rows: Vec<usize> = Vec::with_capacity(n);
    let mut visited_cols: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        dist.fill(f64::INFINITY);
        remaining.clear();
        remaining.extend((0..n).rev());
        visited_rows.clear();
        visited_cols.clear();

        let mut row = start;
        let mut reach = 0.0f64;
        let sink = loop {
            visited_rows.push(row);
            let cost_row = &square[row * n..(row + 1) * n];
            let base = reach - u[row];
            let mut lowest = f64::INFINITY;
            let mut pick = NONE;
            for (k, &col) in remaining.iter().enumerate() {
                let d = base + cost_row[col] - v[col];
                if d < dist[col] {
                    path[col] = row;
                    dist[col] = d;
                }
                // Ties go to a free column, which ends the search sooner.
                if dist[col] < lowest || (dist[col] == lowest && row_of_col[col] == NONE) {
                    lowest = dist[col];
                    pick = k;
                }
            }
            reach = lowest;
            let col = remaining.swap_remove(pick);
            visited_cols.push(col);
            if row_of_col[col] == NONE {
                break col;
            }
            row = row_of_col[col];
        };

        u[start] += reach;
        for &r in &visited_rows[1..] {
            u[r] += reach - dist[col_of_row[r]];
        }
        for &c in &visited_cols {
            v[c] -= reach - dist[c];
        }

        let mut col = sink;
        loop {
            let row = path[col];
            row_of_col[col] = row;
            let previous = std::mem::replace(&mut col_of_row[row], col);
            if row == start {
                break;
            }
            col = previous;
        }
    }

    let drone_to_goal = col_of_row.iter().map(|&c| (c < m).then_some(c)).collect();
    Assignment::from_mapping(costs, drone_to_goal)
}

/// Exhaustive search over all injective goal-to-drone maps. Test oracle for
/// [`solve_lap`]; refuses instances with more than [`BRUTE_FORCE_LIMIT`]
/// drones.
pub fn brute_force_lap(costs: &CostMatrix) -> Result<Assignment> {
    let n = costs.n_drones;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    struct Search<'a> {
        costs: &'a CostMatrix,
        taken: Vec<bool>,
        current: Vec<usize>,
        best_cost: f64,
        best: Vec<usize>,
    }
    impl Search<'_> {
        fn descend(&mut self, goal: usize, partial: f64) {
            if goal == self.costs.n_goals {
                if partial < self.best_cost {
                    self.best_cost = partial;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            for drone in 0..self.costs.n_drones {
                if !self.taken[drone] {
                    self.taken[drone] = true;
                    self.current.push(drone);
                    self.descend(goal + 1, partial + self.costs.get(drone, goal));
                    self.current.pop();
                    self.taken[drone] = false;
                }
            }
        }
    }
    let mut search = Search {
        costs,
        taken: vec![false; n],
        current: Vec::with_capacity(costs.n_goals),
        best_cost: f64::INFINITY,
        best: Vec::new(),
    };
    search.descend(0, 0.0);
    let mut drone_to_goal = vec![None; n];
    for (goal, &drone) in search.best.iter().enumerate() {
        drone_to_goal[drone] = Some(goal);
    }
    Ok(Assignment::from_mapping(costs, drone_to_goal))
}
