// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Goal formations: point types, initial layouts, and converters from show
//! content (glyph text, grayscale images, raw point lists) to goal clouds.

mod glyph;
mod image;

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::SEPARATION_TOLERANCE;
use crate::{Error, Result};

pub use glyph::{glyph_bitmap, lit_cells, rasterize_text, GLYPH_COLUMNS, GLYPH_ROWS};
pub use image::{sample_image, GrayImage};

/// A position in meters. Serialized as an `[x, y, z]` triple.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn origin() -> Self {
        Self::default()
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Component-wise `self + v`.
    pub fn offset(&self, v: &Vector3<f64>) -> Self {
        Self::new(self.x + v.x, self.y + v.y, self.z + v.z)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl From<Vector3<f64>> for Point3 {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// An ordered set of points with a free-text label.
///
/// On disk a cloud is a bare JSON array of `[x, y, z]` triples; the label is
/// not persisted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Point3>", into = "Vec<Point3>")]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub label: String,
}

impl From<Vec<Point3>> for PointCloud {
    fn from(points: Vec<Point3>) -> Self {
        Self {
            points,
            label: String::new(),
        }
    }
}

impl From<PointCloud> for Vec<Point3> {
    fn from(cloud: PointCloud) -> Self {
        cloud.points
    }
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, label: impl Into<String>) -> Self {
        Self {
            points,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Checks the requirements on a goal set: non-empty, finite, and free of
    /// duplicates (points closer than 1e-9 m).
    pub fn validate_goal_set(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptyFormation(format!("goal set {:?} has no points", self.label)));
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite goal {p}")));
        }
        let mut duplicate = None;
        crate::spatial::pairs_within(&self.points, 1e-9, |i, j, _| {
            duplicate.get_or_insert((i, j));
        });
        if let Some((i, j)) = duplicate {
            return Err(Error::InvalidInput(format!(
                "goal set {:?} has duplicate points {i} and {j}",
                self.label
            )));
        }
        Ok(())
    }

    /// Smallest pairwise distance, or `+inf` for fewer than two points.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.min(p.distance(q));
            }
        }
        best
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let cloud: PointCloud = serde_json::from_str(&text)?;
        Ok(cloud.with_label(path.as_ref().display().to_string()))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Embedding plane for planar formations, named by its two axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xy,
    /// Vertical plane facing the audience along `-y`.
    #[default]
    Xz,
    Yz,
}

impl Plane {
    /// Maps planar coordinates (`horizontal`, `vertical`) to a 3D point
    /// relative to `anchor`. The axis normal to the plane keeps the anchor's
    /// value.
    pub fn embed(self, anchor: &Point3, horizontal: f64, vertical: f64) -> Point3 {
        match self {
            Plane::Xy => Point3::new(anchor.x + horizontal, anchor.y + vertical, anchor.z),
            Plane::Xz => Point3::new(anchor.x + horizontal, anchor.y, anchor.z + vertical),
            Plane::Yz => Point3::new(anchor.x, anchor.y + horizontal, anchor.z + vertical),
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xy" => Ok(Plane::Xy),
            "xz" => Ok(Plane::Xz),
            "yz" => Ok(Plane::Yz),
            other => Err(Error::InvalidParameter(format!("unknown plane {other:?}"))),
        }
    }
}

/// One goal formation of a show.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationStage {
    pub goals: PointCloud,
    /// Absolute show time by which every drone must be in place. `None`
    /// means "as soon as the dynamic limits allow".
    pub arrival_time: Option<f64>,
    pub hover_duration: f64,
}

impl FormationStage {
    pub fn validate_sequence(stages: &[FormationStage]) -> Result<()> {
        let mut last: Option<f64> = None;
        for (i, stage) in stages.iter().enumerate() {
            if !(stage.hover_duration >= 0.0 && stage.hover_duration.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "stage {i}: hover duration {} must be finite and >= 0",
                    stage.hover_duration
                )));
            }
            if let Some(t) = stage.arrival_time {
                if !t.is_finite() {
                    return Err(Error::InvalidParameter(format!("stage {i}: arrival time {t} is not finite")));
                }
                if let Some(prev) = last {
                    if t <= prev {
                        return Err(Error::InvalidParameter(format!(
                            "stage {i}: arrival time {t} is not after the previous stage ({prev})"
                        )));
                    }
                }
                last = Some(t);
            }
        }
        Ok(())
    }
}

/// `n` uniformly random points in the axis-aligned box `[lo, hi]`, no two
/// closer than `min_separation`, by dart throwing from a ChaCha8 stream
/// seeded with `seed`. A flat box (`lo.z == hi.z`) gives a planar cloud.
pub fn random_cloud(n: usize, lo: Point3, hi: Point3, min_separation: f64, seed: u64) -> Result<PointCloud> {
    if !(min_separation > 0.0 && min_separation.is_finite()) {
        return Err(Error::InvalidParameter(format!("separation {min_separation} must be positive")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z) {
        return Err(Error::InvalidParameter(format!("bad box [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = crate::spatial::IncrementalGrid::new(min_separation);
    let mut points = Vec::with_capacity(n);
    let budget = 1000 * n.max(1);
    let mut throws = 0;
    while points.len() < n {
        if throws == budget {
            return Err(Error::GenerationFailed(format!(
                "placed {} of {n} points {min_separation} m apart after {budget} attempts",
                points.len()
            )));
        }
        throws += 1;
        let p = Point3::new(
            lo.x + (hi.x - lo.x) * rng.gen::<f64>(),
            lo.y + (hi.y - lo.y) * rng.gen::<f64>(),
            lo.z + (hi.z - lo.z) * rng.gen::<f64>(),
        );
        if grid.is_clear(&p) {
            grid.insert(p);
            points.push(p);
        }
    }
    Ok(PointCloud::new(points, "random"))
}

/// `n` points on a square grid in the horizontal plane through `origin`,
/// row-major along `+x` then `+y`. The last row may be partial.
pub fn grid_layout(n: usize, spacing: f64, origin: Point3) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point".into()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid spacing {spacing} must be positive")));
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let points = (0..n)
        .map(|k| {
            let (row, col) = (k / cols, k % cols);
            Point3::new(
                origin.x + col as f64 * spacing,
                origin.y + row as f64 * spacing,
                origin.z,
            )
        })
        .collect();
    Ok(PointCloud::new(points, format!("grid {n}")))
}

/// Result of [`enforce_min_separation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Thinned {
    pub cloud: PointCloud,
    /// Indices into the input cloud, in removal order.
    pub removed: Vec<usize>,
}

/// Drops points until every remaining pair is at least `d_min` apart.
///
/// Repeatedly removes the point involved in the most violations (lowest index
/// on ties). Surviving points keep their relative order.
pub fn enforce_min_separation(cloud: &PointCloud, d_min: f64) -> Result<Thinned> {
    if !(d_min > 0.0 && d_min.is_finite()) {
        return Err(Error::InvalidParameter(format!("d_min {d_min} must be positive")));
    }
    let n = cloud.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    crate::spatial::pairs_within(&cloud.points, d_min, |i, j, d| {
        if d < d_min - SEPARATION_TOLERANCE {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    });
    let mut degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut alive = vec![true; n];
    let mut removed = Vec::new();
    loop {
        let worst = (0..n)
            .filter(|&i| alive[i] && degree[i] > 0)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if degree[b] >= degree[i] => Some(b),
                _ => Some(i),
            });
        let Some(victim) = worst else { break };
        alive[victim] = false;
        removed.push(victim);
        for &k in &adjacency[victim] {
            if alive[k] {
                degree[k] -= 1;
            }
        }
        degree[victim] = 0;
    }
    let points = cloud
        .points
        .iter()
        .zip(&alive)
        .filter_map(|(p, &keep)| keep.then_some(*p))
        .collect();
    Ok(Thinned {
        cloud: PointCloud::new(points, cloud.label.clone()),
        removed,
    })
}

/// Similarity transform `p -> scale * R * p + translation`.
pub fn transform(cloud: &PointCloud, scale: f64, rotation: &Matrix3<f64>, translation: Point3) -> Result<PointCloud> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale {scale} must be positive")));
    }
    let defect = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
    if !(defect <= 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "rotation is not orthonormal (|R^T R - I| = {defect:.3e})"
        )));
    }
    let t = translation.coords();
    let points = cloud
        .points
        .iter()
        .map(|p| Point3::from(rotation * p.coords() * scale + t))
        .collect();
    Ok(PointCloud::new(points, cloud.label.clone()))
}
