// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Pairwise separation over time, and repair of conflicting trajectories.
//!
//! Separation is checked on a uniform time grid (plus every segment
//! junction). Each sample buckets drone positions into a uniform spatial grid
//! so the per-sample cost is linear in the swarm size; samples run in
//! parallel.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formation::Point3;
use crate::trajectory::{
    allocate_segment_times, check_dynamic_limits, generate_trajectory_with, Boundary, DroneParams, Trajectory,
    DOMAIN_SLACK,
};
use crate::{Error, Result};

/// Distances this far below the threshold still count as separated, which
/// absorbs round-off in polynomial evaluation at exact-threshold spacings.
pub const SEPARATION_TOLERANCE: f64 = 1e-9;

/// Default sampling step of the separation check, seconds.
pub const DEFAULT_CHECK_DT: f64 = 0.05;

/// Departure delay applied by the temporal repair step, seconds.
pub const STAGGER_STEP: f64 = 0.5;

/// One pair's run of consecutive sub-threshold samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEvent {
    pub pair: (usize, usize),
    pub start: f64,
    pub end: f64,
    pub min_distance: f64,
    pub time_of_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Smallest sampled distance; `+inf` (`null` in JSON) with fewer than two drones.
    #[serde(with = "infinite_as_null")]
    pub min_distance: f64,
    pub pair: Option<(usize, usize)>,
    pub time: Option<f64>,
    pub threshold: f64,
    pub dt: f64,
    pub samples: usize,
    pub violations: Vec<ViolationEvent>,
}

impl SeparationReport {
    pub fn is_clear(&self) -> bool {
        self.violations.is_empty()
    }

    /// Combines reports over consecutive windows checked at the same threshold.
    pub fn merge(mut self, other: SeparationReport) -> SeparationReport {
        if other.min_distance < self.min_distance {
            self.min_distance = other.min_distance;
            self.pair = other.pair;
            self.time = other.time;
        }
        self.samples += other.samples;
        self.violations.extend(other.violations);
        self.violations
            .sort_by(|a, b| a.start.total_cmp(&b.start).then(a.pair.cmp(&b.pair)));
        self
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Default)]
struct SampleResult {
    closest: Option<(f64, usize, usize)>,
    violations: Vec<(usize, usize, f64)>,
}

impl SampleResult {
    fn consider(&mut self, i: usize, j: usize, d: f64, threshold: f64) {
        if self.closest.is_none_or(|(best, _, _)| d < best) {
            self.closest = Some((d, i, j));
        }
        if d < threshold - SEPARATION_TOLERANCE {
            self.violations.push((i, j, d));
        }
    }
}

fn check_sample(positions: &[Point3], threshold: f64) -> SampleResult {
    let mut result = SampleResult::default();
    // Any pair within the search radius is found exactly; the brute-force
    // fallback only runs when the whole sample is sparser than that.
    crate::spatial::pairs_within(positions, 2.0 * threshold, |i, j, d| result.consider(i, j, d, threshold));
    if result.closest.is_none() {
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                result.consider(i, j, positions[i].distance(&positions[j]), threshold);
            }
        }
    }
    result
}

/// Sample times: a grid anchored at the window start (quantized to whole
/// nanoseconds so that a grid at `dt / 2` contains the grid at `dt`), every
/// junction inside the window, and the window end.
fn sample_times(trajs: &[Trajectory], window: (f64, f64), dt: f64) -> Result<Vec<f64>> {
    let step_ns = (dt * 1e9).round() as u64;
    if step_ns == 0 {
        return Err(Error::InvalidParameter(format!("dt {dt} is below one nanosecond")));
    }
    let (ta, tb) = window;
    let steps = ((tb - ta) * 1e9 / step_ns as f64 + 1e-6).floor() as u64;
    let mut times: Vec<f64> = (0..=steps).map(|i| ta + (i * step_ns) as f64 / 1e9).collect();
    for t in trajs {
        times.extend(t.junction_times().into_iter().filter(|&j| j > ta && j < tb));
    }
    times.push(tb);
    times.retain(|&t| t <= tb);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(times)
}

/// Checks `||p_i(t) - p_j(t)|| >= threshold` for every pair over `window`.
///
/// Every trajectory must be defined over the whole window.
pub fn min_pairwise_separation(
    trajs: &[Trajectory],
    window: (f64, f64),
    dt: f64,
    threshold: f64,
) -> Result<SeparationReport> {
    if trajs.is_empty() {
        return Err(Error::InvalidInput("no trajectories to check".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt {dt} must be positive")));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must be positive")));
    }
    let (ta, tb) = window;
    if !(ta.is_finite() && tb.is_finite() && ta <= tb) {
        return Err(Error::InvalidParameter(format!("bad window [{ta}, {tb}]")));
    }
    for (i, t) in trajs.iter().enumerate() {
        if t.start_time > ta + DOMAIN_SLACK || t.end_time() < tb - DOMAIN_SLACK {
            return Err(Error::InvalidInput(format!(
                "trajectory {i} spans [{}, {}], not the window [{ta}, {tb}]",
                t.start_time,
                t.end_time()
            )));
        }
    }
    let times = sample_times(trajs, window, dt)?;

    let results: Vec<SampleResult> = times
        .par_iter()
        .map(|&t| {
            let positions: Vec<Point3> = trajs.iter().map(|traj| traj.position(t)).collect();
            check_sample(&positions, threshold)
        })
        .collect();

    let mut report = SeparationReport {
        min_distance: f64::INFINITY,
        pair: None,
        time: None,
        threshold,
        dt,
        samples: times.len(),
        violations: Vec::new(),
    };
    let mut hits: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (k, r) in results.iter().enumerate() {
        if let Some((d, i, j)) = r.closest {
            if d < report.min_distance {
                report.min_distance = d;
                report.pair = Some((i, j));
                report.time = Some(times[k]);
            }
        }
        hits.extend(r.violations.iter().map(|&(i, j, d)| (i, j, k, d)));
    }

    hits.sort_by_key(|&(i, j, k, _)| (i, j, k));
    let mut events: Vec<ViolationEvent> = Vec::new();
    let mut last: Option<(usize, usize, usize)> = None;
    for (i, j, k, d) in hits {
        let extends = matches!(last, Some((li, lj, lk)) if li == i && lj == j && lk + 1 == k);
        if extends {
            let ev = events.last_mut().expect("run in progress");
            ev.end = times[k];
            if d < ev.min_distance {
                ev.min_distance = d;
                ev.time_of_min = times[k];
            }
        } else {
            events.push(ViolationEvent {
                pair: (i, j),
                start: times[k],
                end: times[k],
                min_distance: d,
                time_of_min: times[k],
            });
        }
        last = Some((i, j, k));
    }
    events.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.pair.cmp(&b.pair)));
    report.violations = events;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairOptions {
    pub max_iters: usize,
    /// Nominal sampling step; every check runs at half this step.
    pub dt: f64,
}

impl Default for RepairOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            dt: DEFAULT_CHECK_DT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub trajectories: Vec<Trajectory>,
    pub iterations: usize,
    /// Drones whose trajectories were modified, ascending.
    pub repaired: Vec<usize>,
    /// Acceptance check at `dt / 2`.
    pub report: SeparationReport,
}

#[derive(Debug, Clone, Copy, Default)]
struct RepairState {
    stagger: f64,
    detours: usize,
}

/// [`verify_and_repair_with`] at the default sampling step.
pub fn verify_and_repair(trajs: Vec<Trajectory>, params: &DroneParams, max_iters: usize) -> Result<Vec<Trajectory>> {
    let options = RepairOptions {
        max_iters,
        ..RepairOptions::default()
    };
    Ok(verify_and_repair_with(trajs, params, options)?.trajectories)
}

/// Repairs separation conflicts among trajectories that share one time
/// window.
///
/// Each iteration takes every conflicting pair and perturbs its later-index
/// drone. A drone's first perturbation delays its departure by
/// [`STAGGER_STEP`] and compresses its motion to keep the arrival time, when
/// the dynamic limits allow it; later perturbations route it through a
/// midpoint pushed sideways, away from the conflict, by `d_min` times the
/// number of detours so far. Start and end positions never change.
pub fn verify_and_repair_with(
    trajs: Vec<Trajectory>,
    params: &DroneParams,
    options: RepairOptions,
) -> Result<RepairOutcome> {
    if options.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    let Some(first) = trajs.first() else {
        return Err(Error::InvalidInput("no trajectories to repair".into()));
    };
    let window = (first.start_time, first.end_time());
    for (i, t) in trajs.iter().enumerate() {
        if (t.start_time - window.0).abs() > 1e-9 || (t.end_time() - window.1).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "trajectory {i} does not share the window [{}, {}]",
                window.0, window.1
            )));
        }
    }

    let originals = trajs.clone();
    let mut current = trajs;
    let mut states = vec![RepairState::default(); current.len()];
    let mut iterations = 0;
    loop {
        // The half-step grid contains the full-step one, so a single check
        // at dt / 2 serves as both the loop test and the acceptance check.
        let report = min_pairwise_separation(&current, window, options.dt / 2.0, params.d_min)?;
        if report.is_clear() {
            let repaired = (0..current.len()).filter(|&i| current[i] != originals[i]).collect();
            return Ok(RepairOutcome {
                trajectories: current,
                iterations,
                repaired,
                report,
            });
        }
        if iterations == options.max_iters {
            return Err(Error::UnresolvedConflict {
                iterations,
                violations: report.violations,
            });
        }
        iterations += 1;

        let mut targets: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for ev in &report.violations {
            let (i, j) = ev.pair;
            targets.entry(j).or_insert((i, ev.time_of_min));
        }
        for (j, (i, t)) in targets {
            let away = current[j].position(t).coords() - current[i].position(t).coords();
            current[j] = perturb(&originals[j], &mut states[j], away, params)?;
        }
    }
}

fn perturb(original: &Trajectory, state: &mut RepairState, away: Vector3<f64>, params: &DroneParams) -> Result<Trajectory> {
    let (ta, tb) = (original.start_time, original.end_time());
    let window = tb - ta;
    let start = original.start_position();
    let goal = original.end_position();
    let moves = start.distance(&goal) > 1e-9;
    let order = original.segments[0].order();

    if moves && state.stagger == 0.0 && state.detours == 0 && window > 2.0 * STAGGER_STEP {
        let delay = STAGGER_STEP;
        let motion = original.retimed((window - delay) / window).starting_at(ta + delay);
        let dynamics = check_dynamic_limits(&motion, params, 0.01)?;
        if dynamics.first_violation.is_none() {
            state.stagger = delay;
            let mut staggered = Trajectory::hover(start, ta, delay, order)?;
            staggered.append(motion)?;
            return Ok(staggered);
        }
    }

    state.detours += 1;
    let travel = goal.coords() - start.coords();
    let mut side = if moves {
        let u = travel.normalize();
        away - u * away.dot(&u)
    } else {
        away
    };
    if side.norm() < 1e-9 {
        let u = if moves { travel.normalize() } else { Vector3::x() };
        side = u.cross(&Vector3::z());
        if side.norm() < 1e-9 {
            side = u.cross(&Vector3::x());
        }
    }
    let offset = side.normalize() * params.d_min * state.detours as f64;
    let mid = Point3::from((start.coords() + goal.coords()) * 0.5 + offset);
    let waypoints = [start, mid, goal];
    let motion_window = window - state.stagger;
    let raw = allocate_segment_times(&waypoints, 1.0)?;
    let total: f64 = raw.iter().sum();
    let durations: Vec<f64> = raw.iter().map(|d| d * motion_window / total).collect();
    let motion = generate_trajectory_with(&waypoints, &durations, Boundary::Rest, order, ta + state.stagger)?;
    if state.stagger > 0.0 {
        let mut out = Trajectory::hover(start, ta, state.stagger, order)?;
        out.append(motion)?;
        Ok(out)
    } else {
        Ok(motion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::generate_trajectory;

    fn transit(from: Point3, to: Point3, duration: f64) -> Trajectory {
        generate_trajectory(&[from, to], &[duration], &DroneParams::default()).unwrap()
    }

    #[test]
    fn parallel_transits_at_exact_threshold_are_clear() {
        let p = DroneParams::default();
        assert_eq!(2.0 * p.radius * p.eta(), 1.5);
        let a = transit(Point3::origin(), Point3::new(10.0, 0.0, 0.0), 10.0);
        let b = transit(Point3::new(0.0, 1.5, 0.0), Point3::new(10.0, 1.5, 0.0), 10.0);
        let r = min_pairwise_separation(&[a, b], (0.0, 10.0), 0.05, p.d_min).unwrap();
        assert!((r.min_distance - 1.5).abs() < 1e-12);
        assert!(r.is_clear());
    }

    #[test]
    fn single_drone_is_vacuously_clear() {
        let a = transit(Point3::origin(), Point3::new(1.0, 0.0, 0.0), 1.0);
        let r = min_pairwise_separation(&[a], (0.0, 1.0), 0.05, 1.5).unwrap();
        assert_eq!(r.min_distance, f64::INFINITY);
        assert!(r.is_clear() && r.pair.is_none());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"min_distance\":null"));
        let back: SeparationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.min_distance, f64::INFINITY);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(
            min_pairwise_separation(&[], (0.0, 1.0), 0.05, 1.5),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn head_on_transits_conflict_at_the_crossing() {
        // Mirror-image transits along the x axis meet at x = 5 when t = 5 by
        // symmetry of the rest-to-rest profile; closest approach is zero.
        let a = transit(Point3::origin(), Point3::new(10.0, 0.0, 0.0), 10.0);
        let b = transit(Point3::new(10.0, 0.0, 0.0), Point3::origin(), 10.0);
        let r = min_pairwise_separation(&[a, b], (0.0, 10.0), 0.05, 1.5).unwrap();
        assert_eq!(r.violations.len(), 1);
        let ev = &r.violations[0];
        assert_eq!(ev.pair, (0, 1));
        assert!(ev.start < 5.0 && ev.end > 5.0);
        assert!((ev.time_of_min - 5.0).abs() < 1e-9);
        assert!(ev.min_distance < 1e-9);
        assert_eq!(r.min_distance, ev.min_distance);
    }

    #[test]
    fn window_must_be_covered() {
        let a = transit(Point3::origin(), Point3::new(1.0, 0.0, 0.0), 1.0);
        assert!(min_pairwise_separation(&[a], (0.0, 2.0), 0.05, 1.5).is_err());
    }

    #[test]
    fn half_step_grid_contains_the_full_step_grid() {
        let a = transit(Point3::origin(), Point3::new(1.0, 0.0, 0.0), 7.3);
        let coarse = sample_times(std::slice::from_ref(&a), (0.3, 7.6), 0.05).unwrap();
        let fine = sample_times(std::slice::from_ref(&a), (0.3, 7.6), 0.025).unwrap();
        assert!(coarse.iter().all(|t| fine.contains(t)));
    }

    #[test]
    fn clean_input_is_returned_unchanged() {
        let a = transit(Point3::origin(), Point3::new(10.0, 0.0, 0.0), 10.0);
        let b = transit(Point3::new(0.0, 3.0, 0.0), Point3::new(10.0, 3.0, 0.0), 10.0);
        let out = verify_and_repair_with(vec![a.clone(), b.clone()], &DroneParams::default(), RepairOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.trajectories, vec![a, b]);
        assert!(out.repaired.is_empty());
    }

    #[test]
    fn crossing_conflict_is_resolved_with_endpoints_kept() {
        let a = transit(Point3::new(-8.0, 0.0, 10.0), Point3::new(8.0, 0.0, 10.0), 12.0);
        let b = transit(Point3::new(0.0, -8.0, 10.0), Point3::new(0.0, 8.0, 10.0), 12.0);
        let before = min_pairwise_separation(&[a.clone(), b.clone()], (0.0, 12.0), 0.05, 1.5).unwrap();
        assert!(!before.is_clear());
        let params = DroneParams::default();
        let out = verify_and_repair_with(vec![a.clone(), b.clone()], &params, RepairOptions::default()).unwrap();
        assert!(out.iterations >= 1);
        assert_eq!(out.repaired, vec![1]);
        let after = min_pairwise_separation(&out.trajectories, (0.0, 12.0), 0.025, 1.5).unwrap();
        assert!(after.is_clear(), "{after:?}");
        for (new, old) in out.trajectories.iter().zip([&a, &b]) {
            assert!(new.start_position().distance(&old.start_position()) < 1e-6);
            assert!(new.end_position().distance(&old.end_position()) < 1e-6);
            assert!((new.end_time() - old.end_time()).abs() < 1e-9);
        }
    }

    #[test]
    fn funnel_through_one_point_is_unresolved_in_one_iteration() {
        // Eight drones on a circle all cross to the antipode through the
        // center at the same instant.
        let n = 8;
        let trajs: Vec<Trajectory> = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                let p = Point3::new(10.0 * a.cos(), 10.0 * a.sin(), 5.0);
                let q = Point3::new(-p.x, -p.y, 5.0);
                transit(p, q, 10.0)
            })
            .collect();
        let err = verify_and_repair(trajs, &DroneParams::default(), 1).unwrap_err();
        match err {
            Error::UnresolvedConflict { iterations, violations } => {
                assert_eq!(iterations, 1);
                assert!(!violations.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hovering_drone_dodges_a_transit() {
        let a = transit(Point3::new(-6.0, 0.0, 5.0), Point3::new(6.0, 0.0, 5.0), 10.0);
        let b = Trajectory::hover(Point3::new(0.0, 0.5, 5.0), 0.0, 10.0, 7).unwrap();
        let out = verify_and_repair_with(vec![a, b], &DroneParams::default(), RepairOptions::default()).unwrap();
        assert_eq!(out.repaired, vec![1]);
        assert!(out.report.is_clear());
        assert!(out.trajectories[1].end_position().distance(&Point3::new(0.0, 0.5, 5.0)) < 1e-6);
    }

    #[test]
    fn zero_iterations_is_invalid() {
        let a = transit(Point3::origin(), Point3::new(1.0, 0.0, 0.0), 1.0);
        assert!(matches!(verify_and_repair(vec![a], &DroneParams::default(), 0), Err(Error::InvalidParameter(_))));
    }
}
