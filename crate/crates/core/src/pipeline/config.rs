use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::objectives::{DriftRates, LossWeights};
use crate::render::RasterSettings;
use crate::scene::TemplatePaths;

use super::PipelineError;

/// Every knob of a reconstruction run. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub inv_sigma: f64,
    /// Normalized device units.
    pub box_length: f64,
    pub k: usize,
    /// mm; overridden by `camera.json`.
    pub sensor_width: f64,
    /// mm; overridden by `camera.json`.
    pub focal_length: f64,
    /// `[H, W]` of the optimization raster and of exported previews.
    pub render_resolution: [usize; 2],
    /// Optional smaller `[H, W]` raster for the optimization only.
    pub opt_resolution: Option<[usize; 2]>,
    /// `[H, W]` of the albedo texture.
    pub albedo_resolution: [usize; 2],
    pub lambda_rgb: f64,
    pub lambda_mask: f64,
    pub lambda_pose: f64,
    pub lambda_scale: f64,
    pub lambda_scale_axes: f64,
    pub lambda_scale_smooth: f64,
    pub lambda_smooth_pos: f64,
    pub lambda_smooth_rot: f64,
    pub lambda_smooth_pose: f64,
    pub lambda_dir: f64,
    pub epochs: usize,
    pub lr_theta: f64,
    /// Shared by beta and P.
    pub lr_beta_p: f64,
    /// Shared by albedo and the water filter.
    pub lr_appearance: f64,
    pub lr_sg: f64,
    /// m/s
    pub v_surf: f64,
    /// m/s
    pub v_dive: f64,
    /// Hz; overridden by `camera.json`.
    pub frame_rate: f64,
    pub seed: u64,
    /// The direction term is switched off when mask centroids never move this
    /// many pixels away from the first one.
    pub direction_disable_px: f64,
    pub strict_paper_integrand: bool,
    pub vertical_drift: bool,
    pub drift_level_threshold: f64,
    pub sg_lobes: usize,
    pub template_mesh: Option<PathBuf>,
    pub template_rig: Option<PathBuf>,
    /// Width profile for the elliptical column of the report.
    pub profile: Option<PathBuf>,
    pub hw_ratios: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        RunConfig {
            inv_sigma: 100_000.0,
            box_length: 0.01,
            k: 40,
            sensor_width: 17.27,
            focal_length: 12.29,
            render_resolution: [720, 480],
            opt_resolution: None,
            albedo_resolution: [512, 512],
            lambda_rgb: w.rgb,
            lambda_mask: w.mask,
            lambda_pose: w.pose,
            lambda_scale: w.scale,
            lambda_scale_axes: w.scale_axes,
            lambda_scale_smooth: w.scale_smooth,
            lambda_smooth_pos: w.smooth_pos,
            lambda_smooth_rot: w.smooth_rot,
            lambda_smooth_pose: w.smooth_pose,
            lambda_dir: w.direction,
            epochs: 100,
            lr_theta: 0.01,
            lr_beta_p: 0.01,
            lr_appearance: 0.001,
            lr_sg: 0.01,
            v_surf: 6.6,
            v_dive: 2.2,
            frame_rate: 50.0,
            seed: 0,
            direction_disable_px: 2.0,
            strict_paper_integrand: false,
            vertical_drift: true,
            drift_level_threshold: 1e-3,
            sg_lobes: 9,
            template_mesh: None,
            template_rig: None,
            profile: None,
            hw_ratios: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let c: RunConfig =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            rgb: self.lambda_rgb,
            mask: self.lambda_mask,
            pose: self.lambda_pose,
            scale: self.lambda_scale,
            scale_axes: self.lambda_scale_axes,
            scale_smooth: self.lambda_scale_smooth,
            smooth_pos: self.lambda_smooth_pos,
            smooth_rot: self.lambda_smooth_rot,
            smooth_pose: self.lambda_smooth_pose,
            direction: self.lambda_dir,
        }
    }

    pub fn raster(&self) -> RasterSettings {
        RasterSettings {
            inv_sigma: self.inv_sigma,
            box_length: self.box_length,
            k: self.k,
        }
    }

    pub fn drift_rates(&self, frame_rate: f64) -> DriftRates {
        DriftRates {
            v_surf: self.v_surf,
            v_dive: self.v_dive,
            frame_rate,
            level_threshold: self.drift_level_threshold,
        }
    }

    /// `(H, W)` the optimization runs at.
    pub fn fit_resolution(&self) -> (usize, usize) {
        let r = self.opt_resolution.unwrap_or(self.render_resolution);
        (r[0], r[1])
    }

    pub fn template_paths(&self) -> Result<Option<TemplatePaths>, PipelineError> {
        match (&self.template_mesh, &self.template_rig) {
            (Some(mesh), Some(rig)) => Ok(Some(TemplatePaths {
                mesh: mesh.clone(),
                rig: rig.clone(),
            })),
            (None, None) => Ok(None),
            _ => Err(PipelineError::Config(
                "template_mesh and template_rig must be given together".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |what: &str| Err(PipelineError::Config(format!("{what} out of range")));
        let positive = [
            ("inv_sigma", self.inv_sigma),
            ("box_length", self.box_length),
            ("sensor_width", self.sensor_width),
            ("focal_length", self.focal_length),
            ("frame_rate", self.frame_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name);
            }
        }
        let nonneg = [
            ("lr_theta", self.lr_theta),
            ("lr_beta_p", self.lr_beta_p),
            ("lr_appearance", self.lr_appearance),
            ("lr_sg", self.lr_sg),
            ("v_surf", self.v_surf),
            ("v_dive", self.v_dive),
            ("direction_disable_px", self.direction_disable_px),
            ("drift_level_threshold", self.drift_level_threshold),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name);
            }
        }
        if let Some(t) = self.weights().invalid() {
            return bad(&format!("lambda_{}", t.name()));
        }
        if self.k == 0 {
            return bad("k");
        }
        if self.sg_lobes == 0 {
            return bad("sg_lobes");
        }
        for (name, r) in [
            ("render_resolution", Some(self.render_resolution)),
            ("opt_resolution", self.opt_resolution),
            ("albedo_resolution", Some(self.albedo_resolution)),
        ] {
            if r.is_some_and(|r| r[0] == 0 || r[1] == 0) {
                return bad(name);
            }
        }
        self.template_paths()?;
        Ok(())
    }
}
