// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Piecewise-polynomial trajectories: minimum-snap generation, sampling,
//! dynamic-limit checks and uniform time scaling.

mod minsnap;
mod qp;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::formation::Point3;
use crate::{Error, Result};

pub use minsnap::{build_min_snap_qp, snap_hessian, Boundary, EndpointDerivatives, MinSnapQp};
pub use qp::{solve_qp_equality, KktSystem, QpProblem, RESIDUAL_TOLERANCE};

/// Shortest segment [`allocate_segment_times`] hands out, seconds.
pub const MIN_SEGMENT_DURATION: f64 = 0.1;

/// Slack allowed when sampling just outside a trajectory's domain, seconds.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Describes the coefficient convention of serialized trajectories.
pub const COEFFICIENT_BASIS: &str =
    "monomial; segment s evaluates sum_m c[m] * tau^m with tau = (t - t_s) / duration in [0, 1]";

/// Vehicle limits and safety geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneParams {
    /// Effective vehicle radius `R`, meters.
    pub radius: f64,
    /// Required separation `2 R eta` between any two drones, meters.
    pub d_min: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
    /// Polynomial degree `k` of every segment; odd and at least 7.
    pub poly_order: usize,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            radius: 0.18,
            d_min: 1.5,
            v_max: 3.0,
            a_max: 2.5,
            j_max: 5.0,
            poly_order: 7,
        }
    }
}

impl DroneParams {
    /// Safety margin `eta = d_min / (2 R)`.
    pub fn eta(&self) -> f64 {
        self.d_min / (2.0 * self.radius)
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.d_min = 2.0 * self.radius * eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("d_min", self.d_min),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("j_max", self.j_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.eta() > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "d_min {} must exceed the vehicle diameter {}",
                self.d_min,
                2.0 * self.radius
            )));
        }
        if self.poly_order < 7 || self.poly_order.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "polynomial order {} must be odd and at least 7",
                self.poly_order
            )));
        }
        Ok(())
    }
}

/// Position and its first three time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub position: Point3,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub jerk: Vector3<f64>,
}

/// One polynomial piece, coefficients in ascending powers of normalized time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySegment {
    pub duration: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl PolySegment {
    pub fn constant(p: Point3, duration: f64, order: usize) -> Self {
        let axis = |v: f64| {
            let mut c = vec![0.0; order + 1];
            c[0] = v;
            c
        };
        Self {
            duration,
            x: axis(p.x),
            y: axis(p.y),
            z: axis(p.z),
        }
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn order(&self) -> usize {
        self.x.len().saturating_sub(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidInput(format!("segment duration {} must be positive", self.duration)));
        }
        let n = self.x.len();
        if n == 0 || self.y.len() != n || self.z.len() != n {
            return Err(Error::InvalidInput("segment axes need equal, non-empty coefficient lists".into()));
        }
        if [&self.x, &self.y, &self.z].iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("non-finite segment coefficient".into()));
        }
        Ok(())
    }

    /// Position at normalized time `tau`.
    pub fn position(&self, tau: f64) -> Point3 {
        Point3::new(horner(&self.x, tau), horner(&self.y, tau), horner(&self.z, tau))
    }

    /// Derivatives of orders 0..=3 with respect to *physical* time at
    /// normalized time `tau`.
    pub fn derivatives(&self, tau: f64) -> [Vector3<f64>; 4] {
        let mut out = [Vector3::zeros(); 4];
        for axis in 0..3 {
            let c = self.axis(axis);
            let mut scale = 1.0;
            for (r, slot) in out.iter_mut().enumerate() {
                slot[axis] = tau_derivative(c, r, tau) * scale;
                scale /= self.duration;
            }
        }
        out
    }

    fn state(&self, tau: f64) -> KinematicState {
        let [p, v, a, j] = self.derivatives(tau);
        KinematicState {
            position: Point3::from(p),
            velocity: v,
            acceleration: a,
            jerk: j,
        }
    }
}

fn horner(c: &[f64], tau: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * tau + v)
}

fn tau_derivative(c: &[f64], r: usize, tau: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(r)
        .rev()
        .fold(0.0, |acc, (m, &v)| acc * tau + v * minsnap::falling(m, r))
}

/// Consecutive polynomial segments starting at `start_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_time: f64,
    pub segments: Vec<PolySegment>,
}

impl Trajectory {
    pub fn new(start_time: f64, segments: Vec<PolySegment>) -> Result<Self> {
        let t = Self { start_time, segments };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start_time.is_finite() {
            return Err(Error::InvalidInput("non-finite start time".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidInput("trajectory has no segments".into()));
        }
        self.segments.iter().try_for_each(PolySegment::validate)
    }

    /// Holds `position` for `duration` seconds.
    pub fn hover(position: Point3, start_time: f64, duration: f64, order: usize) -> Result<Self> {
        Self::new(start_time, vec![PolySegment::constant(position, duration, order)])
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    /// Same trajectory shifted to begin at `start_time`.
    pub fn starting_at(mut self, start_time: f64) -> Self {
        self.start_time = start_time;
        self
    }

    /// Interior segment boundaries.
    pub fn junction_times(&self) -> Vec<f64> {
        let mut t = self.start_time;
        let mut out = Vec::with_capacity(self.segments.len().saturating_sub(1));
        for s in &self.segments[..self.segments.len() - 1] {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Covering segment and normalized time for `t`, clamped to the domain.
    fn locate(&self, t: f64) -> (&PolySegment, f64) {
        let mut seg_start = self.start_time;
        let last = self.segments.len() - 1;
        for (i, s) in self.segments.iter().enumerate() {
            let seg_end = seg_start + s.duration;
            if t < seg_end || i == last {
                let tau = ((t - seg_start) / s.duration).clamp(0.0, 1.0);
                return (s, tau);
            }
            seg_start = seg_end;
        }
        unreachable!("trajectory has at least one segment")
    }

    /// Position at `t`, clamped to the domain.
    pub fn position(&self, t: f64) -> Point3 {
        let (s, tau) = self.locate(t);
        s.position(tau)
    }

    pub fn start_position(&self) -> Point3 {
        self.segments[0].position(0.0)
    }

    pub fn end_position(&self) -> Point3 {
        self.segments[self.segments.len() - 1].position(1.0)
    }

    pub fn end_state(&self) -> KinematicState {
        self.segments[self.segments.len() - 1].state(1.0)
    }

    /// Full kinematic state at `t`. Junction times evaluate the later segment.
    pub fn sample(&self, t: f64) -> Result<KinematicState> {
        let end = self.end_time();
        if !(t >= self.start_time - DOMAIN_SLACK && t <= end + DOMAIN_SLACK) {
            return Err(Error::OutOfDomain {
                t,
                start: self.start_time,
                end,
            });
        }
        let (s, tau) = self.locate(t);
        Ok(s.state(tau))
    }

    /// Largest jump in derivatives 0..=3 across the interior junctions.
    pub fn junction_jumps(&self) -> [f64; 4] {
        let mut worst = [0.0f64; 4];
        for pair in self.segments.windows(2) {
            let left = pair[0].derivatives(1.0);
            let right = pair[1].derivatives(0.0);
            for r in 0..4 {
                worst[r] = worst[r].max((left[r] - right[r]).norm());
            }
        }
        worst
    }

    /// Snap cost `int |p''''(t)|^2 dt` over the whole trajectory.
    pub fn snap_cost(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let h = snap_hessian(s.order(), s.duration);
                (0..3)
                    .map(|axis| {
                        let c = nalgebra::DVector::from_column_slice(s.axis(axis));
                        0.5 * (c.transpose() * &h * &c)[0]
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Every duration multiplied by `factor` (any positive value).
    pub(crate) fn retimed(&self, factor: f64) -> Trajectory {
        Trajectory {
            start_time: self.start_time,
            segments: self
                .segments
                .iter()
                .map(|s| PolySegment {
                    duration: s.duration * factor,
                    ..s.clone()
                })
                .collect(),
        }
    }

    /// Appends `next`, which must begin where and when `self` ends.
    pub fn append(&mut self, next: Trajectory) -> Result<()> {
        let gap = (next.start_time - self.end_time()).abs();
        let jump = next.start_position().distance(&self.end_position());
        if gap > 1e-6 || jump > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "cannot chain trajectories: time gap {gap:.3e} s, position jump {jump:.3e} m"
            )));
        }
        self.segments.extend(next.segments);
        Ok(())
    }
}

/// Free-function form of [`Trajectory::sample`].
pub fn sample(traj: &Trajectory, t: f64) -> Result<KinematicState> {
    traj.sample(t)
}

/// Stretches every segment by `factor >= 1`. The geometric path is
/// unchanged; derivative of order `r` scales by `factor^-r`.
pub fn time_scale(traj: &Trajectory, factor: f64) -> Result<Trajectory> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::InvalidParameter(format!("time scale factor {factor} must be >= 1")));
    }
    Ok(traj.retimed(factor))
}

/// Distance-proportional segment durations at `v_nominal`, floored at
/// [`MIN_SEGMENT_DURATION`].
pub fn allocate_segment_times(waypoints: &[Point3], v_nominal: f64) -> Result<Vec<f64>> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidInput("need at least two waypoints".into()));
    }
    if !(v_nominal > 0.0 && v_nominal.is_finite()) {
        return Err(Error::InvalidParameter(format!("nominal speed {v_nominal} must be positive")));
    }
    waypoints
        .windows(2)
        .enumerate()
        .map(|(index, w)| {
            let d = w[0].distance(&w[1]);
            if d < 1e-9 {
                return Err(Error::DegenerateSegment { index });
            }
            Ok((d / v_nominal).max(MIN_SEGMENT_DURATION))
        })
        .collect()
}

/// Rest-to-rest minimum-snap trajectory through `waypoints`, starting at t = 0.
pub fn generate_trajectory(waypoints: &[Point3], durations: &[f64], params: &DroneParams) -> Result<Trajectory> {
    generate_trajectory_with(waypoints, durations, Boundary::Rest, params.poly_order, 0.0)
}

/// General form of [`generate_trajectory`].
pub fn generate_trajectory_with(
    waypoints: &[Point3],
    durations: &[f64],
    boundary: Boundary,
    order: usize,
    start_time: f64,
) -> Result<Trajectory> {
    let qp = build_min_snap_qp(waypoints, durations, boundary, order)?;
    let kkt = KktSystem::new(&qp.hessian, &qp.eq_matrix)?;
    let zero = nalgebra::DVector::zeros(qp.unknowns());
    let width = order + 1;
    let mut coeffs: [Vec<f64>; 3] = Default::default();
    for axis in 0..3 {
        let value = |p: &Point3| [p.x, p.y, p.z][axis];
        let first = value(&waypoints[0]);
        coeffs[axis] = if boundary.is_rest_on_axis(axis) && waypoints.iter().all(|p| value(p) == first) {
            // A motionless axis is exactly constant; skip the round-off of a solve.
            let mut c = vec![0.0; qp.unknowns()];
            c.iter_mut().step_by(width).for_each(|v| *v = first);
            c
        } else {
            kkt.solve(&zero, &qp.axis_rhs[axis])?.as_slice().to_vec()
        };
    }
    let segments = durations
        .iter()
        .enumerate()
        .map(|(s, &duration)| {
            let span = s * width..(s + 1) * width;
            PolySegment {
                duration,
                x: coeffs[0][span.clone()].to_vec(),
                y: coeffs[1][span.clone()].to_vec(),
                z: coeffs[2][span].to_vec(),
            }
        })
        .collect();
    Trajectory::new(start_time, segments)
}

/// Shortest duration of a single-segment rest-to-rest move over `distance`
/// that keeps the sampled speed, acceleration and jerk within `params`.
///
/// Every such move is the same normalized profile scaled in space and time,
/// so the bound follows from the peaks of the unit move.
pub fn min_rest_to_rest_duration(distance: f64, params: &DroneParams) -> Result<f64> {
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(Error::InvalidParameter(format!("distance {distance} must be finite and >= 0")));
    }
    if distance < 1e-9 {
        return Ok(MIN_SEGMENT_DURATION);
    }
    let unit = generate_trajectory_with(
        &[Point3::origin(), Point3::new(1.0, 0.0, 0.0)],
        &[1.0],
        Boundary::Rest,
        params.poly_order,
        0.0,
    )?;
    let peaks = check_dynamic_limits(&unit, params, 1e-4)?;
    let t = (peaks.max_speed * distance / params.v_max)
        .max((peaks.max_acceleration * distance / params.a_max).sqrt())
        .max((peaks.max_jerk * distance / params.j_max).cbrt());
    // Sampled peaks can sit a hair under the true ones.
    Ok((t * (1.0 + 1e-3)).max(MIN_SEGMENT_DURATION))
}

/// Which bound a sample exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Speed,
    Acceleration,
    Jerk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub time: f64,
    pub kind: LimitKind,
    pub value: f64,
    pub limit: f64,
}

/// Sampled peaks of the derivative norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub max_speed: f64,
    pub max_acceleration: f64,
    pub max_jerk: f64,
    pub first_violation: Option<LimitViolation>,
}

impl DynamicsReport {
    /// Smallest uniform stretch that brings every sampled peak within its
    /// limit (at least 1).
    pub fn required_time_scale(&self, params: &DroneParams) -> f64 {
        1.0f64
            .max(self.max_speed / params.v_max)
            .max((self.max_acceleration / params.a_max).sqrt())
            .max((self.max_jerk / params.j_max).cbrt())
    }
}

const LIMIT_SLACK: f64 = 1e-9;

/// Samples on a `dt` grid plus every junction and the end time.
pub fn check_dynamic_limits(traj: &Trajectory, params: &DroneParams, dt: f64) -> Result<DynamicsReport> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt {dt} must be positive")));
    }
    let t0 = traj.start_time;
    let steps = (traj.duration() / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * dt).collect();
    times.extend(traj.junction_times());
    times.push(traj.end_time());
    times.sort_by(f64::total_cmp);

    let mut report = DynamicsReport {
        max_speed: 0.0,
        max_acceleration: 0.0,
        max_jerk: 0.0,
        first_violation: None,
    };
    for &t in &times {
        let s = traj.sample(t)?;
        let checks = [
            (LimitKind::Speed, s.velocity.norm(), params.v_max),
            (LimitKind::Acceleration, s.acceleration.norm(), params.a_max),
            (LimitKind::Jerk, s.jerk.norm(), params.j_max),
        ];
        report.max_speed = report.max_speed.max(checks[0].1);
        report.max_acceleration = report.max_acceleration.max(checks[1].1);
        report.max_jerk = report.max_jerk.max(checks[2].1);
        if report.first_violation.is_none() {
            report.first_violation = checks
                .iter()
                .find(|(_, value, limit)| *value > limit * (1.0 + LIMIT_SLACK))
                .map(|&(kind, value, limit)| LimitViolation { time: t, kind, value, limit });
        }
    }
    Ok(report)
}

/// Uniformly stretches `traj` until [`check_dynamic_limits`] passes.
pub fn fit_to_limits(traj: &Trajectory, params: &DroneParams, dt: f64) -> Result<Trajectory> {
    let mut current = traj.clone();
    for _ in 0..16 {
        let report = check_dynamic_limits(&current, params, dt)?;
        if report.first_violation.is_none() {
            return Ok(current);
        }
        let factor = report.required_time_scale(params).max(1.0 + 1e-6);
        current = time_scale(&current, factor * (1.0 + 1e-9))?;
    }
    Err(Error::NumericalFailure {
        reason: "time scaling did not converge onto the dynamic limits".into(),
        condition: f64::NAN,
    })
}
