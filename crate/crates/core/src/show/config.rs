// SPDX-License-Identifier: Apache-2.0 OR MIT

//! The JSON show document and its resolution into a [`ShowConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{InitialLayout, ShowConfig};
use crate::collision::DEFAULT_CHECK_DT;
use crate::formation::{
    enforce_min_separation, random_cloud, rasterize_text, sample_image, FormationStage, GrayImage, Plane, Point3, PointCloud,
};
use crate::trajectory::DroneParams;
use crate::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Show document as written by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShowDocument {
    pub schema_version: u32,
    pub n_drones: usize,
    pub initial_layout: LayoutSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default = "default_hover")]
    pub hover_default: f64,
    #[serde(default = "default_altitude")]
    pub takeoff_altitude: f64,
    #[serde(default = "default_true")]
    pub landing: bool,
    #[serde(default = "default_repair_iters")]
    pub max_repair_iters: usize,
    pub stages: Vec<StageSpec>,
}

fn default_hover() -> f64 {
    2.0
}

fn default_altitude() -> f64 {
    5.0
}

fn default_true() -> bool {
    true
}

fn default_repair_iters() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum LayoutSpec {
    Grid {
        spacing: f64,
        #[serde(default = "Point3::origin")]
        origin: Point3,
    },
    Points(PointCloud),
    /// Seeded random positions in a box; `min_separation` defaults to
    /// `d_min`.
    Random {
        min: Point3,
        max: Point3,
        #[serde(default)]
        min_separation: Option<f64>,
    },
}

/// Vehicle parameters; either `d_min` or `eta` may set the separation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub radius: Option<f64>,
    pub d_min: Option<f64>,
    pub eta: Option<f64>,
    pub v_max: Option<f64>,
    pub a_max: Option<f64>,
    pub j_max: Option<f64>,
    pub poly_order: Option<usize>,
}

impl ParamsSpec {
    pub fn resolve(&self) -> Result<DroneParams> {
        let defaults = DroneParams::default();
        let mut p = DroneParams {
            radius: self.radius.unwrap_or(defaults.radius),
            d_min: self.d_min.unwrap_or(defaults.d_min),
            v_max: self.v_max.unwrap_or(defaults.v_max),
            a_max: self.a_max.unwrap_or(defaults.a_max),
            j_max: self.j_max.unwrap_or(defaults.j_max),
            poly_order: self.poly_order.unwrap_or(defaults.poly_order),
        };
        match (self.d_min, self.eta) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameter("give either d_min or eta, not both".into()));
            }
            (None, Some(eta)) => p = p.with_eta(eta),
            _ => {}
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub arrival_time: Option<f64>,
    #[serde(default)]
    pub hover_duration: Option<f64>,
    /// Drop goals closer than `d_min` instead of rejecting the stage.
    #[serde(default)]
    pub thin: bool,
    pub goals: GoalSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GoalSource {
    Points(PointCloud),
    Glyphs(GlyphSource),
    Image(ImageSource),
    /// Path to a point-cloud JSON file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlyphSource {
    pub text: String,
    pub cell_size: f64,
    #[serde(default = "Point3::origin")]
    pub anchor: Point3,
    #[serde(default)]
    pub plane: Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSource {
    /// Plain PGM file.
    pub path: PathBuf,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub max_points: usize,
    pub scale: f64,
    #[serde(default = "Point3::origin")]
    pub anchor: Point3,
    #[serde(default)]
    pub plane: Plane,
}

fn default_threshold() -> f64 {
    0.5
}

impl GoalSource {
    pub fn resolve(&self, base: &Path) -> Result<PointCloud> {
        match self {
            GoalSource::Points(cloud) => Ok(cloud.clone()),
            GoalSource::Glyphs(g) => rasterize_text(&g.text, g.cell_size, g.anchor, g.plane),
            GoalSource::Image(img) => {
                let image = GrayImage::read_pgm(base.join(&img.path))?;
                sample_image(&image, img.threshold, img.max_points, img.scale, img.anchor, img.plane)
            }
            GoalSource::File(path) => PointCloud::read_json(base.join(path)),
        }
    }

    fn default_label(&self) -> Option<String> {
        match self {
            GoalSource::Glyphs(g) => Some(g.text.clone()),
            GoalSource::File(p) | GoalSource::Image(ImageSource { path: p, .. }) => {
                p.file_stem().map(|s| s.to_string_lossy().into_owned())
            }
            GoalSource::Points(c) if !c.label.is_empty() => Some(c.label.clone()),
            GoalSource::Points(_) => None,
        }
    }
}

impl ShowDocument {
    /// Resolves every goal source; relative paths are joined to `base`.
    /// `seed` drives the random layout, if any.
    pub fn resolve(&self, base: &Path, seed: u64) -> Result<ShowConfig> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "show schema version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let params = self.params.resolve()?;
        let initial_layout = match &self.initial_layout {
            LayoutSpec::Grid { spacing, origin } => InitialLayout::Grid {
                spacing: *spacing,
                origin: *origin,
            },
            LayoutSpec::Points(cloud) => InitialLayout::Points(cloud.clone()),
            LayoutSpec::Random {
                min,
                max,
                min_separation,
            } => InitialLayout::Points(random_cloud(
                self.n_drones,
                *min,
                *max,
                min_separation.unwrap_or(params.d_min),
                seed,
            )?),
        };
        let stages = self
            .stages
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut goals = spec.goals.resolve(base)?;
                if spec.thin {
                    goals = enforce_min_separation(&goals, params.d_min)?.cloud;
                }
                let label = spec
                    .label
                    .clone()
                    .or_else(|| spec.goals.default_label())
                    .unwrap_or_else(|| format!("stage {}", i + 1));
                Ok(FormationStage {
                    goals: goals.with_label(label),
                    arrival_time: spec.arrival_time,
                    hover_duration: spec.hover_duration.unwrap_or(self.hover_default),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShowConfig {
            n_drones: self.n_drones,
            initial_layout,
            params,
            stages,
            takeoff_altitude: self.takeoff_altitude,
            landing: self.landing,
            max_repair_iters: self.max_repair_iters,
            check_dt: DEFAULT_CHECK_DT,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_takes_defaults() {
        let doc: ShowDocument = serde_json::from_str(
            r#"{
                "schema_version": 1,
                "n_drones": 4,
                "initial_layout": {"grid": {"spacing": 2.25}},
                "stages": [{"goals": {"glyphs": {"text": "1", "cell_size": 2.25}}}]
            }"#,
        )
        .unwrap();
        let config = doc.resolve(Path::new("."), 0).unwrap();
        assert_eq!(config.params, DroneParams::default());
        assert_eq!(config.takeoff_altitude, 5.0);
        assert!(config.landing);
        assert_eq!(config.stages[0].hover_duration, 2.0);
        assert_eq!(config.stages[0].goals.label, "1");
        assert_eq!(config.stages[0].goals.len(), 10);
    }

    #[test]
    fn eta_sets_the_separation() {
        let spec = ParamsSpec {
            eta: Some(0.75 / 0.18),
            ..Default::default()
        };
        assert!((spec.resolve().unwrap().d_min - 1.5).abs() < 1e-12);
        let both = ParamsSpec {
            eta: Some(5.0),
            d_min: Some(1.5),
            ..Default::default()
        };
        assert!(both.resolve().is_err());
    }

    #[test]
    fn unknown_fields_are_parse_errors() {
        let err = serde_json::from_str::<ShowDocument>(
            r#"{"schema_version": 1, "n_drones": 1, "initial_layout": {"grid": {"spacing": 2}}, "stages": [], "bogus": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn random_layout_is_seeded() {
        let doc: ShowDocument = serde_json::from_str(
            r#"{
                "schema_version": 1,
                "n_drones": 20,
                "initial_layout": {"random": {"min": [0, 0, 0], "max": [30, 30, 0]}},
                "stages": [{"goals": {"points": [[0, 0, 10]]}}]
            }"#,
        )
        .unwrap();
        let a = doc.resolve(Path::new("."), 7).unwrap();
        let b = doc.resolve(Path::new("."), 7).unwrap();
        let c = doc.resolve(Path::new("."), 8).unwrap();
        assert_eq!(a.initial_layout, b.initial_layout);
        assert_ne!(a.initial_layout, c.initial_layout);
    }
}
