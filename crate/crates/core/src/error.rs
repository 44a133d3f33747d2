// SPDX-License-Identifier: Apache-2.0 OR MIT

use thiserror::Error;

use crate::collision::ViolationEvent;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported glyph {0:?}")]
    UnsupportedGlyph(char),

    #[error("empty formation: {0}")]
    EmptyFormation(String),

    #[error("insufficient drones: {drones} drones for {goals} goals")]
    InsufficientDrones { drones: usize, goals: usize },

    #[error("instance too large for exhaustive search: {size} (limit {limit})")]
    InstanceTooLarge { size: usize, limit: usize },

    #[error("degenerate segment {index}: consecutive waypoints coincide")]
    DegenerateSegment { index: usize },

    #[error("polynomial order {order} cannot satisfy {constraints} constraints with {unknowns} unknowns")]
    InsufficientOrder {
        order: usize,
        constraints: usize,
        unknowns: usize,
    },

    #[error("equality constraints are rank deficient (rank {rank} of {rows} rows)")]
    SingularConstraints { rank: usize, rows: usize },

    #[error("KKT solve failed: {reason} (condition estimate {condition:.3e})")]
    NumericalFailure { reason: String, condition: f64 },

    #[error("time {t} outside trajectory domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("unresolved conflicts after {iterations} repair iterations: {}", summarize(.violations))]
    UnresolvedConflict {
        iterations: usize,
        violations: Vec<ViolationEvent>,
    },

    #[error("stage {stage} ({label}) infeasible: {reason}")]
    StageInfeasible {
        stage: usize,
        label: String,
        reason: String,
    },

    #[error("goal cloud generation failed: {0}")]
    GenerationFailed(String),

    #[error("malformed image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize(violations: &[ViolationEvent]) -> String {
    const SHOWN: usize = 5;
    let mut parts: Vec<String> = violations
        .iter()
        .take(SHOWN)
        .map(|v| {
            format!(
                "drones {}-{} at [{:.3}, {:.3}] s min {:.4} m",
                v.pair.0, v.pair.1, v.start, v.end, v.min_distance
            )
        })
        .collect();
    if violations.len() > SHOWN {
        parts.push(format!("... {} more", violations.len() - SHOWN));
    }
    parts.join("; ")
}
