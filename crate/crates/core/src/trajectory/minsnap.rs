// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Minimum-snap problem assembly.
//!
//! Unknowns are the monomial coefficients of every segment in normalized time
//! `tau = (t - t_s) / T_s`, segment-major: `x[s * (k + 1) + m]` multiplies
//! `tau^m` on segment `s`. A `d^r/dt^r` derivative is the `tau` derivative
//! divided by `T_s^r`. All three axes share the Hessian and constraint
//! matrix and differ only in the right-hand side.

use nalgebra::{DMatrix, DVector, Vector3};

use super::qp::QpProblem;
use crate::formation::Point3;
use crate::{Error, Result};

/// Velocity, acceleration and jerk at a trajectory endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EndpointDerivatives {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub jerk: Vector3<f64>,
}

impl EndpointDerivatives {
    fn order(&self, r: usize) -> &Vector3<f64> {
        match r {
            1 => &self.velocity,
            2 => &self.acceleration,
            3 => &self.jerk,
            _ => unreachable!("endpoint derivatives cover orders 1..=3"),
        }
    }

    fn is_zero(&self) -> bool {
        self.velocity == Vector3::zeros() && self.acceleration == Vector3::zeros() && self.jerk == Vector3::zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Boundary {
    /// Zero velocity, acceleration and jerk at both ends.
    #[default]
    Rest,
    Specified {
        start: EndpointDerivatives,
        end: EndpointDerivatives,
    },
}

impl Boundary {
    fn ends(&self) -> (EndpointDerivatives, EndpointDerivatives) {
        match self {
            Boundary::Rest => Default::default(),
            Boundary::Specified { start, end } => (*start, *end),
        }
    }

    pub(crate) fn is_rest_on_axis(&self, axis: usize) -> bool {
        let (s, e) = self.ends();
        (1..=3).all(|r| s.order(r)[axis] == 0.0 && e.order(r)[axis] == 0.0)
    }

    pub fn is_rest(&self) -> bool {
        let (s, e) = self.ends();
        s.is_zero() && e.is_zero()
    }
}

/// Minimum-snap QP for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MinSnapQp {
    pub order: usize,
    pub durations: Vec<f64>,
    /// `1/2 x^T H x` equals the snap cost `sum_s int |p''''(t)|^2 dt` on one axis.
    pub hessian: DMatrix<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub axis_rhs: [DVector<f64>; 3],
}

impl MinSnapQp {
    pub fn unknowns(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn constraints(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn axis_problem(&self, axis: usize) -> QpProblem {
        QpProblem {
            hessian: self.hessian.clone(),
            linear: DVector::zeros(self.unknowns()),
            eq_matrix: self.eq_matrix.clone(),
            eq_rhs: self.axis_rhs[axis].clone(),
        }
    }
}

/// `m! / (m - r)!`, zero when `r > m`.
pub(crate) fn falling(m: usize, r: usize) -> f64 {
    if r > m {
        return 0.0;
    }
    ((m - r + 1)..=m).map(|v| v as f64).product()
}

/// Hessian block of one segment: `H[m][n] = 2 P(m) P(n) / ((m + n - 7) T^7)`
/// with `P(m) = m (m-1) (m-2) (m-3)`.
pub fn snap_hessian(order: usize, duration: f64) -> DMatrix<f64> {
    let size = order + 1;
    let scale = duration.powi(-7);
    DMatrix::from_fn(size, size, |m, n| {
        if m < 4 || n < 4 {
            0.0
        } else {
            2.0 * falling(m, 4) * falling(n, 4) / (m + n - 7) as f64 * scale
        }
    })
}

/// Row of `d^r/dtau^r` evaluated at `tau` (0 or 1) for one segment.
fn derivative_row(order: usize, r: usize, tau: f64) -> impl Iterator<Item = f64> {
    (0..=order).map(move |m| {
        if m < r {
            0.0
        } else if m == r {
            falling(m, r)
        } else {
            falling(m, r) * tau.powi((m - r) as i32)
        }
    })
}

/// Assembles the minimum-snap QP through `waypoints` with the given segment
/// durations.
///
/// Constraints per axis: both end positions of every segment, velocity,
/// acceleration and jerk at the trajectory ends, and continuity of velocity,
/// acceleration and jerk at every interior junction. Position continuity is
/// implied by the shared waypoint, so the rows are linearly independent.
pub fn build_min_snap_qp(waypoints: &[Point3], durations: &[f64], boundary: Boundary, order: usize) -> Result<MinSnapQp> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidInput("need at least two waypoints".into()));
    }
    let segments = waypoints.len() - 1;
    if durations.len() != segments {
        return Err(Error::InvalidInput(format!(
            "{} durations for {segments} segments",
            durations.len()
        )));
    }
    if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::InvalidParameter(format!("segment duration {d} must be positive")));
    }
    if let Some(p) = waypoints.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite waypoint {p}")));
    }
    let (start, end) = boundary.ends();
    if [start, end]
        .iter()
        .any(|e| (1..=3).any(|r| e.order(r).iter().any(|v| !v.is_finite())))
    {
        return Err(Error::InvalidInput("non-finite boundary derivative".into()));
    }

    let width = order + 1;
    let unknowns = segments * width;
    let constraints = 2 * segments + 6 + 3 * (segments - 1);
    if constraints > unknowns {
        return Err(Error::InsufficientOrder {
            order,
            constraints,
            unknowns,
        });
    }

    let mut hessian = DMatrix::zeros(unknowns, unknowns);
    for (s, &t) in durations.iter().enumerate() {
        hessian
            .view_mut((s * width, s * width), (width, width))
            .copy_from(&snap_hessian(order, t));
    }

    let mut a = DMatrix::zeros(constraints, unknowns);
    let mut rhs = [
        DVector::zeros(constraints),
        DVector::zeros(constraints),
        DVector::zeros(constraints),
    ];
    let mut row = 0;
    let mut set_rhs = |row: usize, v: [f64; 3]| {
        for axis in 0..3 {
            rhs[axis][row] = v[axis];
        }
    };

    for s in 0..segments {
        for (tau, wp) in [(0.0, &waypoints[s]), (1.0, &waypoints[s + 1])] {
            for (m, v) in derivative_row(order, 0, tau).enumerate() {
                a[(row, s * width + m)] = v;
            }
            set_rhs(row, [wp.x, wp.y, wp.z]);
            row += 1;
        }
    }

    let last = segments - 1;
    for r in 1..=3 {
        for (s, tau, value) in [(0, 0.0, start.order(r)), (last, 1.0, end.order(r))] {
            for (m, v) in derivative_row(order, r, tau).enumerate() {
                a[(row, s * width + m)] = v;
            }
            let scale = durations[s].powi(r as i32);
            set_rhs(row, [value.x * scale, value.y * scale, value.z * scale]);
            row += 1;
        }
    }

    for s in 0..segments - 1 {
        let (left, right) = (durations[s], durations[s + 1]);
        let reference = left.min(right);
        for r in 1..=3 {
            let wl = (reference / left).powi(r as i32);
            let wr = (reference / right).powi(r as i32);
            for (m, v) in derivative_row(order, r, 1.0).enumerate() {
                a[(row, s * width + m)] = v * wl;
            }
            for (m, v) in derivative_row(order, r, 0.0).enumerate() {
                a[(row, (s + 1) * width + m)] = -v * wr;
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, constraints);

    Ok(MinSnapQp {
        order,
        durations: durations.to_vec(),
        hessian,
        eq_matrix: a,
        axis_rhs: rhs,
    })
}
