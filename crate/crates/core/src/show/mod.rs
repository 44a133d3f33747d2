// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Multi-stage show planning: takeoff, one assignment + transit + hover per
//! formation, then return and landing.

mod config;
mod export;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{build_cost_matrix, solve_lap, Assignment};
use crate::collision::{min_pairwise_separation, verify_and_repair_with, RepairOptions, SeparationReport, DEFAULT_CHECK_DT};
use crate::formation::{grid_layout, FormationStage, Point3, PointCloud};
use crate::trajectory::{
    check_dynamic_limits, generate_trajectory_with, min_rest_to_rest_duration, Boundary, DroneParams, Trajectory,
    COEFFICIENT_BASIS,
};
use crate::{Error, Result};

pub use config::{GlyphSource, GoalSource, ImageSource, LayoutSpec, ParamsSpec, ShowDocument, StageSpec};
pub use export::{export_frames, frame_count, FRAME_HEADER};

pub const PLAN_SCHEMA_VERSION: u32 = 1;

/// Phase boundaries are rounded up to this grid when no deadline pins them.
const TIME_QUANTUM: f64 = 0.1;

/// Sampling step used when checking repaired trajectories against the
/// dynamic limits.
const DYNAMICS_DT: f64 = 0.01;

/// Where the drones start.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLayout {
    /// [`grid_layout`] with the given spacing and origin.
    Grid { spacing: f64, origin: Point3 },
    Points(PointCloud),
}

impl InitialLayout {
    pub fn resolve(&self, n_drones: usize) -> Result<PointCloud> {
        match self {
            InitialLayout::Grid { spacing, origin } => grid_layout(n_drones, *spacing, *origin),
            InitialLayout::Points(cloud) => {
                if cloud.len() != n_drones {
                    return Err(Error::InvalidInput(format!(
                        "initial layout has {} points for {n_drones} drones",
                        cloud.len()
                    )));
                }
                Ok(cloud.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShowConfig {
    pub n_drones: usize,
    pub initial_layout: InitialLayout,
    pub params: DroneParams,
    /// Stage labels are taken from each goal cloud's label.
    pub stages: Vec<FormationStage>,
    /// Height climbed during takeoff, meters above the initial layout.
    pub takeoff_altitude: f64,
    pub landing: bool,
    pub max_repair_iters: usize,
    /// Sampling step of the separation checks; the acceptance check of every
    /// phase runs at half this step.
    pub check_dt: f64,
}

impl ShowConfig {
    /// Defaults for everything but the swarm and its formations.
    pub fn new(n_drones: usize, initial_layout: InitialLayout, stages: Vec<FormationStage>) -> Self {
        Self {
            n_drones,
            initial_layout,
            params: DroneParams::default(),
            stages,
            takeoff_altitude: 5.0,
            landing: true,
            max_repair_iters: 50,
            check_dt: DEFAULT_CHECK_DT,
        }
    }

    /// Parses and resolves a show document; relative paths inside it are
    /// taken from the document's directory.
    pub fn from_json_file(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let doc: ShowDocument = serde_json::from_str(&text)?;
        doc.resolve(path.parent().unwrap_or(Path::new(".")), seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_drones == 0 {
            return Err(Error::InvalidParameter("a show needs at least one drone".into()));
        }
        if self.stages.is_empty() {
            return Err(Error::InvalidInput("a show needs at least one stage".into()));
        }
        if !(self.takeoff_altitude > 0.0 && self.takeoff_altitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "takeoff altitude {} must be positive",
                self.takeoff_altitude
            )));
        }
        if self.max_repair_iters == 0 {
            return Err(Error::InvalidParameter("max_repair_iters must be at least 1".into()));
        }
        if !(self.check_dt > 0.0 && self.check_dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("check dt {} must be positive", self.check_dt)));
        }
        FormationStage::validate_sequence(&self.stages)?;
        for stage in &self.stages {
            if stage.goals.len() > self.n_drones {
                return Err(Error::InsufficientDrones {
                    drones: self.n_drones,
                    goals: stage.goals.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Takeoff,
    Transit,
    Hover,
    /// Return to the landing slots followed by the vertical descent.
    Landing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub stage: Option<usize>,
    /// Goal index within the stage, for assigned drones.
    pub goal: Option<usize>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DronePlan {
    pub id: usize,
    pub phases: Vec<Phase>,
}

impl DronePlan {
    /// All phases chained into one trajectory.
    pub fn trajectory(&self) -> Result<Trajectory> {
        let mut phases = self.phases.iter();
        let first = phases
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("drone {} has no phases", self.id)))?;
        let mut out = first.trajectory.clone();
        for p in phases {
            out.append(p.trajectory.clone())?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimelineKind {
    Takeoff,
    Transit,
    Hover,
    Return,
    Land,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub kind: TimelineKind,
    pub stage: Option<usize>,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub index: usize,
    pub label: String,
    pub goals: PointCloud,
    pub assignment: Assignment,
    pub depart: f64,
    pub requested_arrival: Option<f64>,
    pub arrival: f64,
    /// How late `arrival` is against `requested_arrival`.
    pub delay: f64,
    pub hover_end: f64,
    /// Idle drones moved back over their takeoff spot to clear the formation.
    pub relocated: Vec<usize>,
    pub repair_iterations: usize,
    pub repaired_drones: Vec<usize>,
    /// Uniform slow-down applied after repair to respect the dynamic limits.
    pub stretch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedInterval {
    pub on: f64,
    pub off: f64,
}

/// Solver wall-clock, seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanTimings {
    pub t_assignment: f64,
    pub t_trajectory: f64,
    pub t_collision: f64,
    pub t_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub stage_costs: Vec<f64>,
    pub repair_iterations: usize,
    /// Separation over the whole plan, merged from the per-phase checks at
    /// `check_dt / 2`.
    pub separation: SeparationReport,
    pub timings: PlanTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShowPlan {
    pub schema_version: u32,
    pub coefficient_basis: String,
    pub params: DroneParams,
    pub t0: f64,
    pub tf: f64,
    pub drones: Vec<DronePlan>,
    pub stages: Vec<StageRecord>,
    pub timeline: Vec<TimelineEntry>,
    pub led_schedule: Vec<Vec<LedInterval>>,
    pub metrics: PlanMetrics,
}

impl ShowPlan {
    pub fn n_drones(&self) -> usize {
        self.drones.len()
    }

    /// Per-drone trajectories over `[t0, tf]`.
    pub fn trajectories(&self) -> Result<Vec<Trajectory>> {
        self.drones.iter().map(DronePlan::trajectory).collect()
    }

    /// Re-runs the separation check on the stored trajectories.
    pub fn validate(&self, dt: f64) -> Result<SeparationReport> {
        min_pairwise_separation(&self.trajectories()?, (self.t0, self.tf), dt, self.params.d_min)
    }

    pub fn led_on(&self, drone: usize, t: f64) -> bool {
        self.led_schedule[drone].iter().any(|i| t >= i.on && t <= i.off)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a stored plan and checks that its phases chain and span
    /// `[t0, tf]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut plan: ShowPlan = serde_json::from_str(text)?;
        // Goal clouds serialize as bare point lists; the label lives on the record.
        for stage in &mut plan.stages {
            stage.goals.label = stage.label.clone();
        }
        plan.check_structure()?;
        Ok(plan)
    }

    fn check_structure(&self) -> Result<()> {
        if self.schema_version != PLAN_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "plan schema version {} is not supported (expected {PLAN_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.drones.is_empty() {
            return Err(Error::InvalidInput("plan has no drones".into()));
        }
        if self.led_schedule.len() != self.drones.len() {
            return Err(Error::InvalidInput("LED schedule does not match the drone count".into()));
        }
        for (i, d) in self.drones.iter().enumerate() {
            if d.id != i {
                return Err(Error::InvalidInput(format!("drone at index {i} has id {}", d.id)));
            }
            let traj = d.trajectory()?;
            traj.validate()?;
            if (traj.start_time - self.t0).abs() > 1e-6 || (traj.end_time() - self.tf).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "drone {i} spans [{}, {}], plan spans [{}, {}]",
                    traj.start_time,
                    traj.end_time(),
                    self.t0,
                    self.tf
                )));
            }
        }
        Ok(())
    }
}

/// LED on from arrival to hover end in every stage the drone is assigned in.
pub fn led_schedule(plan: &ShowPlan) -> Vec<Vec<LedInterval>> {
    leds_for(plan.n_drones(), &plan.stages)
}

fn leds_for(n_drones: usize, stages: &[StageRecord]) -> Vec<Vec<LedInterval>> {
    (0..n_drones)
        .map(|d| {
            stages
                .iter()
                .filter(|s| s.assignment.drone_to_goal[d].is_some())
                .map(|s| LedInterval {
                    on: s.arrival,
                    off: s.hover_end,
                })
                .collect()
        })
        .collect()
}

fn quantize_up(t: f64) -> f64 {
    ((t / TIME_QUANTUM) - 1e-9).ceil() * TIME_QUANTUM
}

/// Outcome of one synchronized move of the whole swarm.
struct Move {
    trajectories: Vec<Trajectory>,
    arrival: f64,
    repair_iterations: usize,
    repaired: Vec<usize>,
    stretch: f64,
    report: SeparationReport,
}

struct Planner<'a> {
    config: &'a ShowConfig,
    timings: PlanTimings,
}

impl Planner<'_> {
    fn params(&self) -> &DroneParams {
        &self.config.params
    }

    /// Moves every drone from `from[d]` to `to[d]` over `[depart, depart + window]`
    /// and repairs conflicts.
    fn synchronized_move(&mut self, from: &[Point3], to: &[Point3], depart: f64, window: f64) -> Result<Move> {
        let order = self.params().poly_order;
        let clock = Instant::now();
        let trajs: Vec<Trajectory> = from
            .par_iter()
            .zip(to.par_iter())
            .map(|(a, b)| {
                if a.distance(b) > 1e-9 {
                    generate_trajectory_with(&[*a, *b], &[window], Boundary::Rest, order, depart)
                } else {
                    Trajectory::hover(*a, depart, window, order)
                }
            })
            .collect::<Result<_>>()?;
        self.timings.t_trajectory += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let options = RepairOptions {
            max_iters: self.config.max_repair_iters,
            dt: self.config.check_dt,
        };
        let outcome = verify_and_repair_with(trajs, self.params(), options)?;
        self.timings.t_collision += clock.elapsed().as_secs_f64();

        // Detours can exceed the limits; slowing the whole move uniformly
        // keeps its geometry, so separation is unaffected.
        let clock = Instant::now();
        let mut stretch = 1.0f64;
        for &d in &outcome.repaired {
            let report = check_dynamic_limits(&outcome.trajectories[d], self.params(), DYNAMICS_DT)?;
            stretch = stretch.max(report.required_time_scale(self.params()));
        }
        let mut trajectories = outcome.trajectories;
        let mut report = outcome.report;
        if stretch > 1.0 {
            stretch *= 1.0 + 1e-6;
            trajectories = trajectories.iter().map(|t| t.retimed(stretch)).collect();
        }
        self.timings.t_trajectory += clock.elapsed().as_secs_f64();
        if stretch > 1.0 {
            let clock = Instant::now();
            let end = depart + window * stretch;
            report = min_pairwise_separation(&trajectories, (depart, end), self.config.check_dt / 2.0, self.params().d_min)?;
            self.timings.t_collision += clock.elapsed().as_secs_f64();
            if !report.is_clear() {
                return Err(Error::UnresolvedConflict {
                    iterations: outcome.iterations,
                    violations: report.violations,
                });
            }
        }
        let arrival = trajectories[0].end_time();
        Ok(Move {
            trajectories,
            arrival,
            repair_iterations: outcome.iterations,
            repaired: outcome.repaired,
            stretch,
            report,
        })
    }

    /// Separation check of a phase that needs no repair.
    fn check(&mut self, trajs: &[Trajectory], window: (f64, f64)) -> Result<SeparationReport> {
        let clock = Instant::now();
        let report = min_pairwise_separation(trajs, window, self.config.check_dt / 2.0, self.params().d_min)?;
        self.timings.t_collision += clock.elapsed().as_secs_f64();
        if !report.is_clear() {
            return Err(Error::UnresolvedConflict {
                iterations: 0,
                violations: report.violations,
            });
        }
        Ok(report)
    }

    fn required_window(&self, from: &[Point3], to: &[Point3]) -> Result<f64> {
        let farthest = from.iter().zip(to).map(|(a, b)| a.distance(b)).fold(0.0, f64::max);
        min_rest_to_rest_duration(farthest, self.params())
    }
}

fn check_end_configuration(points: &[Point3], d_min: f64) -> Option<(usize, usize, f64)> {
    let mut worst = None;
    crate::spatial::pairs_within(points, d_min, |i, j, d| {
        if d < d_min - crate::collision::SEPARATION_TOLERANCE && worst.is_none() {
            worst = Some((i, j, d));
        }
    });
    worst
}

/// Plans a complete show.
///
/// Every stage assigns goals from the drones' current positions, flies all
/// drones in one synchronized move (unassigned drones hover in place),
/// repairs separation conflicts, and holds the formation for the stage's
/// hover time. Idle drones that would sit inside the next formation are sent
/// back above their takeoff spot.
pub fn plan_show(config: &ShowConfig) -> Result<ShowPlan> {
    let started = Instant::now();
    config.validate()?;
    let params = &config.params;
    let n = config.n_drones;
    let order = params.poly_order;

    let ground = config.initial_layout.resolve(n)?;
    if ground.points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput("initial layout has non-finite coordinates".into()));
    }
    if let Some((i, j, d)) = check_end_configuration(&ground.points, params.d_min) {
        return Err(Error::InvalidInput(format!(
            "initial positions of drones {i} and {j} are {d:.3} m apart, below the {} m separation",
            params.d_min
        )));
    }
    for (s, stage) in config.stages.iter().enumerate() {
        let label = stage_label(s, stage);
        stage.goals.validate_goal_set().map_err(|e| Error::StageInfeasible {
            stage: s,
            label: label.clone(),
            reason: e.to_string(),
        })?;
        let min = stage.goals.min_pairwise_distance();
        if min < params.d_min - crate::collision::SEPARATION_TOLERANCE {
            return Err(Error::StageInfeasible {
                stage: s,
                label,
                reason: format!("goals are {min:.3} m apart, below the {} m separation", params.d_min),
            });
        }
    }

    let mut planner = Planner {
        config,
        timings: PlanTimings::default(),
    };
    let mut phases: Vec<Vec<Phase>> = vec![Vec::new(); n];
    let mut timeline = Vec::new();
    let mut records = Vec::new();
    let lift = nalgebra::Vector3::new(0.0, 0.0, config.takeoff_altitude);
    let overhead: Vec<Point3> = ground.points.iter().map(|p| p.offset(&lift)).collect();

    // Vertical climbs are translated copies of one profile: spacing is kept.
    let clock = Instant::now();
    let climb = quantize_up(min_rest_to_rest_duration(config.takeoff_altitude, params)?);
    let takeoff: Vec<Trajectory> = ground
        .points
        .par_iter()
        .zip(overhead.par_iter())
        .map(|(a, b)| generate_trajectory_with(&[*a, *b], &[climb], Boundary::Rest, order, 0.0))
        .collect::<Result<_>>()?;
    planner.timings.t_trajectory += clock.elapsed().as_secs_f64();
    // Hovers need no sampling of their own: each starts from the end sample
    // of the move before it.
    let mut separation = planner.check(&takeoff, (0.0, climb))?;
    for (d, t) in takeoff.into_iter().enumerate() {
        phases[d].push(Phase {
            kind: PhaseKind::Takeoff,
            stage: None,
            goal: None,
            trajectory: t,
        });
    }
    timeline.push(TimelineEntry {
        kind: TimelineKind::Takeoff,
        stage: None,
        start: 0.0,
        end: climb,
    });

    let mut now = climb;
    let mut positions = overhead.clone();
    for (s, stage) in config.stages.iter().enumerate() {
        let label = stage_label(s, stage);
        let clock = Instant::now();
        let current = PointCloud::new(positions.clone(), "current");
        let costs = build_cost_matrix(&current, &stage.goals)?;
        let assignment = solve_lap(&costs);
        planner.timings.t_assignment += clock.elapsed().as_secs_f64();

        let mut ends = positions.clone();
        for (d, g) in assignment.drone_to_goal.iter().enumerate() {
            if let Some(g) = g {
                ends[d] = stage.goals.points[*g];
            }
        }
        let relocated = clear_formation(&mut ends, &assignment, &stage.goals, &overhead, params.d_min);
        if let Some((i, j, d)) = check_end_configuration(&ends, params.d_min) {
            return Err(Error::StageInfeasible {
                stage: s,
                label,
                reason: format!("drones {i} and {j} would end {d:.3} m apart"),
            });
        }

        let required = planner.required_window(&positions, &ends)?;
        let (window, delay) = match stage.arrival_time {
            Some(at) if at - now >= required => (at - now, 0.0),
            Some(at) => (required, required - (at - now)),
            None => (quantize_up(required), 0.0),
        };
        let mv = planner.synchronized_move(&positions, &ends, now, window)?;
        let arrival = mv.arrival;
        separation = separation.merge(mv.report);
        for (d, t) in mv.trajectories.into_iter().enumerate() {
            phases[d].push(Phase {
                kind: PhaseKind::Transit,
                stage: Some(s),
                goal: assignment.drone_to_goal[d],
                trajectory: t,
            });
        }
        timeline.push(TimelineEntry {
            kind: TimelineKind::Transit,
            stage: Some(s),
            start: now,
            end: arrival,
        });
        let hover_end = arrival + stage.hover_duration;
        if stage.hover_duration > 0.0 {
            for (d, p) in ends.iter().enumerate() {
                phases[d].push(Phase {
                    kind: PhaseKind::Hover,
                    stage: Some(s),
                    goal: assignment.drone_to_goal[d],
                    trajectory: Trajectory::hover(*p, arrival, stage.hover_duration, order)?,
                });
            }
            timeline.push(TimelineEntry {
                kind: TimelineKind::Hover,
                stage: Some(s),
                start: arrival,
                end: hover_end,
            });
        }
        let delay = match stage.arrival_time {
            Some(at) => (arrival - at).max(0.0).max(delay),
            None => 0.0,
        };
        records.push(StageRecord {
            index: s,
            label,
            goals: stage.goals.clone(),
            depart: now,
            requested_arrival: stage.arrival_time,
            arrival,
            delay,
            hover_end,
            relocated,
            repair_iterations: mv.repair_iterations,
            repaired_drones: mv.repaired,
            stretch: mv.stretch,
            assignment,
        });
        now = hover_end;
        positions = ends;
    }

    if config.landing {
        let clock = Instant::now();
        let current = PointCloud::new(positions.clone(), "current");
        let slots = PointCloud::new(overhead.clone(), "landing");
        let assignment = solve_lap(&build_cost_matrix(&current, &slots)?);
        planner.timings.t_assignment += clock.elapsed().as_secs_f64();
        let slot_of: Vec<usize> = assignment
            .drone_to_goal
            .iter()
            .map(|g| g.expect("square assignment covers every drone"))
            .collect();
        let targets: Vec<Point3> = slot_of.iter().map(|&k| overhead[k]).collect();
        let window = quantize_up(planner.required_window(&positions, &targets)?);
        let mv = planner.synchronized_move(&positions, &targets, now, window)?;
        separation = separation.merge(mv.report);
        timeline.push(TimelineEntry {
            kind: TimelineKind::Return,
            stage: None,
            start: now,
            end: mv.arrival,
        });
        let touchdown = mv.arrival + climb;
        timeline.push(TimelineEntry {
            kind: TimelineKind::Land,
            stage: None,
            start: mv.arrival,
            end: touchdown,
        });
        let clock = Instant::now();
        let descents: Vec<Trajectory> = slot_of
            .par_iter()
            .map(|&k| generate_trajectory_with(&[overhead[k], ground.points[k]], &[climb], Boundary::Rest, order, mv.arrival))
            .collect::<Result<_>>()?;
        planner.timings.t_trajectory += clock.elapsed().as_secs_f64();
        separation = separation.merge(planner.check(&descents, (mv.arrival, touchdown))?);
        for (d, (mut ret, descent)) in mv.trajectories.into_iter().zip(descents).enumerate() {
            ret.append(descent)?;
            phases[d].push(Phase {
                kind: PhaseKind::Landing,
                stage: None,
                goal: None,
                trajectory: ret,
            });
        }
        now = touchdown;
    }

    let drones: Vec<DronePlan> = phases
        .into_iter()
        .enumerate()
        .map(|(id, phases)| DronePlan { id, phases })
        .collect();
    let led = leds_for(n, &records);
    let mut timings = planner.timings;
    timings.t_total = started.elapsed().as_secs_f64();
    Ok(ShowPlan {
        schema_version: PLAN_SCHEMA_VERSION,
        coefficient_basis: COEFFICIENT_BASIS.to_string(),
        params: *params,
        t0: 0.0,
        tf: now,
        drones,
        metrics: PlanMetrics {
            stage_costs: records.iter().map(|r| r.assignment.total_cost).collect(),
            repair_iterations: records.iter().map(|r| r.repair_iterations).sum(),
            separation,
            timings,
        },
        stages: records,
        timeline,
        led_schedule: led,
    })
}

fn stage_label(index: usize, stage: &FormationStage) -> String {
    if stage.goals.label.is_empty() {
        format!("stage {}", index + 1)
    } else {
        stage.goals.label.clone()
    }
}

/// Sends idle drones that would sit inside the formation back to their
/// overhead takeoff slot. Returns the drones moved.
fn clear_formation(
    ends: &mut [Point3],
    assignment: &Assignment,
    goals: &PointCloud,
    overhead: &[Point3],
    d_min: f64,
) -> Vec<usize> {
    let limit = d_min - crate::collision::SEPARATION_TOLERANCE;
    let near_goal = |p: &Point3| goals.points.iter().any(|g| g.distance(p) < limit);
    let mut moved = Vec::new();
    for d in assignment.idle_drones() {
        if near_goal(&ends[d]) {
            ends[d] = overhead[d];
            moved.push(d);
        }
    }
    moved
}
