// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Planning engine for drone light shows.
//!
//! The pipeline takes drone start positions and a sequence of goal
//! formations, assigns drones to goals by solving a linear assignment
//! problem over squared distances, fits minimum-snap piecewise polynomial
//! trajectories for every drone, and verifies pairwise separation over time,
//! repairing conflicts by staggering departures or detouring through offset
//! waypoints.
//!
//! Modules follow the pipeline order:
//!
//! * [`formation`] turns glyphs, images and raw point lists into goal clouds.
//! * [`assignment`] builds the cost matrix and solves the assignment problem.
//! * [`trajectory`] generates, samples and time-scales minimum-snap trajectories.
//! * [`collision`] checks separation and repairs conflicting trajectories.
//! * [`show`] orchestrates a multi-stage show and exports frames.
//! * [`bench`] runs the synthetic scaling suite.

// `!(x <= tol)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod bench;
pub mod collision;
mod error;
pub mod formation;
pub mod show;
pub(crate) mod spatial;
pub mod trajectory;

pub use error::{Error, Result};
pub use formation::{Plane, Point3, PointCloud};
pub use trajectory::{DroneParams, KinematicState, PolySegment, Trajectory};
