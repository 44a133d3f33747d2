// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Grayscale image ingestion (ASCII PGM) and thresholded point sampling.

use std::path::Path;

use super::{Plane, Point3, PointCloud};
use crate::{Error, Result};

/// Row-major grayscale image with intensities normalized to `[0, 1]`.
/// Row 0 is the top of the picture.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image("image has no pixels".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Image(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Parses a plain (ASCII, `P2`) portable graymap.
    pub fn parse_pgm(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        match tokens.next() {
            Some("P2") => {}
            Some(other) => return Err(Error::Image(format!("unsupported magic {other:?}, expected P2"))),
            None => return Err(Error::Image("empty file".into())),
        }
        let mut header = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Image(format!("missing {name}")))?
                .parse::<usize>()
                .map_err(|e| Error::Image(format!("bad {name}: {e}")))
        };
        let width = header("width")?;
        let height = header("height")?;
        let maxval = header("maxval")?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Image(format!("maxval {maxval} out of range")));
        }
        let pixels = tokens
            .map(|t| {
                let v: usize = t.parse().map_err(|e| Error::Image(format!("bad pixel {t:?}: {e}")))?;
                if v > maxval {
                    return Err(Error::Image(format!("pixel {v} exceeds maxval {maxval}")));
                }
                Ok(v as f64 / maxval as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, pixels)
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_pgm(&std::fs::read_to_string(path)?)
    }
}

/// Turns bright pixels into goal points.
///
/// Every pixel brighter than `threshold` contributes its center, placed at
/// `scale` meters per pixel in `plane` with the image's bottom-left corner at
/// `anchor`. When more than `max_points` pixels qualify, farthest-point
/// sampling seeded at the first candidate (scan order) picks the subset, and
/// points are returned in selection order.
pub fn sample_image(
    image: &GrayImage,
    threshold: f64,
    max_points: usize,
    scale: f64,
    anchor: Point3,
    plane: Plane,
) -> Result<PointCloud> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must lie in (0, 1)")));
    }
    if max_points == 0 {
        return Err(Error::InvalidParameter("max_points must be at least 1".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale {scale} must be positive")));
    }
    let mut candidates = Vec::new();
    for row in 0..image.height {
        for col in 0..image.width {
            if image.get(col, row) > threshold {
                let h = (col as f64 + 0.5) * scale;
                let v = ((image.height - 1 - row) as f64 + 0.5) * scale;
                candidates.push(plane.embed(&anchor, h, v));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::EmptyFormation(format!("no pixel brighter than {threshold}")));
    }
    let points = if candidates.len() <= max_points {
        candidates
    } else {
        farthest_point_sample(&candidates, max_points)
    };
    Ok(PointCloud::new(points, "image"))
}

fn farthest_point_sample(candidates: &[Point3], count: usize) -> Vec<Point3> {
    let mut nearest = vec![f64::INFINITY; candidates.len()];
    let mut chosen = Vec::with_capacity(count);
    let mut next = 0;
    for _ in 0..count {
        let pick = candidates[next];
        chosen.push(pick);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (c, d)) in candidates.iter().zip(nearest.iter_mut()).enumerate() {
            *d = d.min(c.distance_squared(&pick));
            if *d > best.0 {
                best = (*d, i);
            }
        }
        next = best.1;
    }
    chosen
}
