// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Synthetic scaling benchmarks: a grid of drones flying to a seeded random
//! goal cloud, timed per pipeline phase.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assignment::{build_cost_matrix, solve_lap};
use crate::formation::{grid_layout, random_cloud, FormationStage, Point3, PointCloud};
use crate::show::{plan_show, InitialLayout, ShowConfig};
use crate::trajectory::DroneParams;
use crate::{Error, Result};

/// Ground grid spacing of benchmark swarms, meters. Any two drones flying
/// synchronized straight-line moves under an optimal assignment stay at
/// least `min(start spacing, goal spacing) / sqrt(2)` apart, so a spacing of
/// `sqrt(2) * d_min` or more keeps the default instances conflict-free.
pub const BENCH_SPACING: f64 = 2.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub n_drones: usize,
    pub n_goals: usize,
    pub t_assignment: f64,
    pub t_trajectory: f64,
    pub t_collision: f64,
    pub t_total: f64,
    /// `None` with a single drone.
    pub min_separation: Option<f64>,
    pub assignment_cost: f64,
    pub repair_iterations: usize,
}

pub const CSV_HEADER: &str =
    "n_drones,n_goals,t_assignment,t_trajectory,t_collision,t_total,min_separation,assignment_cost,repair_iterations";

fn spacing_for(params: &DroneParams) -> f64 {
    BENCH_SPACING.max(params.d_min * std::f64::consts::SQRT_2)
}

/// Benchmark goal cloud for `n` drones: random points in a cube above the
/// launch grid.
pub fn bench_goals(n: usize, seed: u64, params: &DroneParams) -> Result<PointCloud> {
    let spacing = spacing_for(params);
    let grid_side = spacing * ((n as f64).sqrt().ceil() - 1.0);
    let side = (2.0 * spacing * (n as f64).cbrt()).max(grid_side).max(spacing);
    let lo = Point3::new(0.0, 0.0, 15.0);
    let hi = Point3::new(side, side, 15.0 + side);
    random_cloud(n, lo, hi, spacing, seed)
}

/// Single-stage show used by the suite: takeoff, transit, hover, no landing.
pub fn bench_config(n: usize, seed: u64, params: &DroneParams) -> Result<ShowConfig> {
    if n == 0 {
        return Err(Error::InvalidParameter("benchmark size must be at least 1".into()));
    }
    let goals = bench_goals(n, seed, params)?.with_label(format!("random-{n}"));
    let mut config = ShowConfig::new(
        n,
        InitialLayout::Grid {
            spacing: spacing_for(params),
            origin: Point3::origin(),
        },
        vec![FormationStage {
            goals,
            arrival_time: None,
            hover_duration: 2.0,
        }],
    );
    config.params = *params;
    config.landing = false;
    Ok(config)
}

fn size_seed(seed: u64, n: usize) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Plans one synthetic show per size, sequentially.
pub fn run_scaling_suite(sizes: &[usize], seed: u64, params: &DroneParams) -> Result<Vec<BenchResult>> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no benchmark sizes given".into()));
    }
    params.validate()?;
    sizes
        .iter()
        .map(|&n| {
            let config = bench_config(n, size_seed(seed, n), params)?;
            let plan = plan_show(&config)?;
            let m = &plan.metrics;
            let sep = m.separation.min_distance;
            Ok(BenchResult {
                n_drones: n,
                n_goals: config.stages[0].goals.len(),
                t_assignment: m.timings.t_assignment,
                t_trajectory: m.timings.t_trajectory,
                t_collision: m.timings.t_collision,
                t_total: m.timings.t_total,
                min_separation: sep.is_finite().then_some(sep),
                assignment_cost: m.stage_costs[0],
                repair_iterations: m.repair_iterations,
            })
        })
        .collect()
}

/// Best-of-`repeats` wall-clock of cost-matrix construction plus LAP solve
/// on the benchmark instance of size `n`.
pub fn time_assignment(n: usize, seed: u64, repeats: usize, params: &DroneParams) -> Result<f64> {
    let starts = grid_layout(n, spacing_for(params), Point3::origin())?;
    let goals = bench_goals(n, size_seed(seed, n), params)?;
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let clock = Instant::now();
        let costs = build_cost_matrix(&starts, &goals)?;
        std::hint::black_box(solve_lap(&costs));
        best = best.min(clock.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidInput("slope needs at least two positive points".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("slope needs at least two distinct sizes".into()));
    }
    Ok(sxy / sxx)
}

pub fn to_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let sep = r.min_separation.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n_drones,
            r.n_goals,
            r.t_assignment,
            r.t_trajectory,
            r.t_collision,
            r.t_total,
            sep,
            r.assignment_cost,
            r.repair_iterations
        );
    }
    out
}

/// Fixed-width summary table.
pub fn to_table(results: &[BenchResult]) -> String {
    let mut out = format!(
        "{:>8} {:>8} {:>12} {:>12} {:>12} {:>12} {:>10}\n",
        "drones", "goals", "assign [s]", "traj [s]", "collide [s]", "total [s]", "min sep"
    );
    for r in results {
        let sep = r.min_separation.map(|d| format!("{d:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>8} {:>8} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>10}",
            r.n_drones, r.n_goals, r.t_assignment, r.t_trajectory, r.t_collision, r.t_total, sep
        );
    }
    out
}
