//! Synthetic drone sequences with known ground truth, and the metrics that
//! compare a recovered parameter file against it.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{rodrigues, TemplateModel};
use crate::geom::{mat_mul, transpose};
use crate::morpho::mesh_volume;
use crate::pipeline::{
    frame_name, render_params, write_mask, write_rgb, CameraInfo, PipelineError, RunConfig,
};
use crate::render::{
    camera_from_drone, default_lobes, Background, Camera, RasterSettings, SgLobe, Texture,
};
use crate::scene::{rest_mesh, ParamsFile, SceneParams, TemplatePaths};

/// Procedural albedo texture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlbedoPattern {
    Constant {
        value: f64,
    },
    /// `count` bands across the body, alternating `low` and `high`.
    Stripes {
        low: f64,
        high: f64,
        count: usize,
    },
    /// `count` discs of radius `radius` (texture units) on `base`.
    Spots {
        base: f64,
        spot: f64,
        count: usize,
        radius: f64,
    },
}

impl AlbedoPattern {
    pub fn texture(&self, height: usize, width: usize, seed: u64) -> Texture {
        let mut tex = Texture::constant(height, width, 0.0);
        let centers: Vec<[f64; 2]> = match self {
            AlbedoPattern::Spots { count, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX);
                (0..*count)
                    .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                    .collect()
            }
            _ => Vec::new(),
        };
        for r in 0..height {
            for c in 0..width {
                let (u, v) = (
                    (c as f64 + 0.5) / width as f64,
                    (r as f64 + 0.5) / height as f64,
                );
                tex.data[r * width + c] = match *self {
                    AlbedoPattern::Constant { value } => value,
                    AlbedoPattern::Stripes { low, high, count } => {
                        if ((v * count as f64) as usize) % 2 == 0 {
                            low
                        } else {
                            high
                        }
                    }
                    AlbedoPattern::Spots {
                        base, spot, radius, ..
                    } => {
                        let hit = centers
                            .iter()
                            .any(|p| (p[0] - u).powi(2) + (p[1] - v).powi(2) <= radius * radius);
                        if hit {
                            spot
                        } else {
                            base
                        }
                    }
                };
            }
        }
        tex
    }
}

/// Straight or gently turning swim with an up-down fluke beat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwimPath {
    /// m
    pub start: [f64; 3],
    /// Initial heading about +y; 0 swims along +z.
    pub heading: f64,
    /// m/s
    pub speed: f64,
    /// rad/s
    #[serde(default)]
    pub turn_rate: f64,
    /// Peak pitch of the peduncle and fluke joints (rad).
    #[serde(default)]
    pub fluke_amplitude: f64,
    /// Hz
    #[serde(default)]
    pub fluke_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    /// `T x M` Rodrigues rows and `T` translations given outright.
    Explicit {
        theta: Vec<Vec<[f64; 3]>>,
        position: Vec<[f64; 3]>,
    },
    Swim(SwimPath),
}

/// Everything that defines a synthetic sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub frames: usize,
    pub frame_rate: f64,
    /// One value per frame, or a single value for all of them (m).
    pub altitude: Vec<f64>,
    /// `[H, W]`
    pub resolution: [usize; 2],
    /// `[H, W]`
    #[serde(default = "default_albedo_resolution")]
    pub albedo_resolution: [usize; 2],
    #[serde(default = "default_sensor")]
    pub sensor_width_mm: f64,
    #[serde(default = "default_focal")]
    pub focal_length_mm: f64,
    /// `M x 4`; zero when absent.
    #[serde(default)]
    pub beta: Option<Vec<[f64; 4]>>,
    pub motion: Motion,
    pub albedo: AlbedoPattern,
    pub water: [f64; 3],
    /// Default lobes when absent.
    #[serde(default)]
    pub lobes: Option<Vec<SgLobe>>,
    #[serde(default = "default_background")]
    pub background: [f64; 3],
    #[serde(default)]
    pub mask_flip_rate: f64,
    #[serde(default)]
    pub image_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub template: Option<TemplatePaths>,
}

fn default_albedo_resolution() -> [usize; 2] {
    [64, 64]
}

fn default_sensor() -> f64 {
    RunConfig::default().sensor_width
}

fn default_focal() -> f64 {
    RunConfig::default().focal_length
}

fn default_background() -> [f64; 3] {
    [0.05, 0.2, 0.3]
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::Input(msg.into())
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let spec: SceneSpec =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.frames == 0 {
            return Err(invalid("frames must be at least 1"));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(invalid("frame_rate must be positive"));
        }
        if self.altitude.len() != 1 && self.altitude.len() != self.frames {
            return Err(invalid(format!(
                "{} altitude values for {} frames",
                self.altitude.len(),
                self.frames
            )));
        }
        if self.altitude.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(invalid("altitude must be positive"));
        }
        if self.resolution.contains(&0) || self.albedo_resolution.contains(&0) {
            return Err(invalid("resolutions must be nonzero"));
        }
        for (name, r) in [
            ("mask_flip_rate", self.mask_flip_rate),
            ("image_sigma", self.image_sigma),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if let Motion::Explicit { theta, position } = &self.motion {
            if theta.len() != self.frames || position.len() != self.frames {
                return Err(invalid(format!(
                    "explicit motion has {} theta frames and {} positions for {} frames",
                    theta.len(),
                    position.len(),
                    self.frames
                )));
            }
        }
        Ok(())
    }

    pub fn altitude_at(&self, t: usize) -> f64 {
        if self.altitude.len() == 1 {
            self.altitude[0]
        } else {
            self.altitude[t]
        }
    }

    pub fn cameras(&self) -> Result<Vec<Camera>, PipelineError> {
        let [h, w] = self.resolution;
        (0..self.frames)
            .map(|t| {
                camera_from_drone(
                    self.sensor_width_mm,
                    self.focal_length_mm,
                    self.altitude_at(t),
                    (h, w),
                )
                .map_err(Into::into)
            })
            .collect()
    }

    /// Ground-truth parameter file; drift is zero.
    pub fn ground_truth(&self, template: &TemplateModel) -> Result<ParamsFile, PipelineError> {
        self.validate()?;
        let m = template.num_groups();
        let t_count = self.frames;
        let beta = self.beta.clone().unwrap_or_else(|| vec![[0.0; 4]; m]);
        let (theta, position) = match &self.motion {
            Motion::Explicit { theta, position } => (theta.clone(), position.clone()),
            Motion::Swim(path) => swim(path, template, t_count, self.frame_rate),
        };
        let [ah, aw] = self.albedo_resolution;
        let params = SceneParams {
            beta,
            theta,
            position,
            albedo: self.albedo.texture(ah, aw, self.seed),
            water: self.water,
            lobes: self
                .lobes
                .clone()
                .unwrap_or_else(|| default_lobes(RunConfig::default().sg_lobes)),
        };
        params.check(template)?;
        Ok(ParamsFile {
            template: self.template.clone(),
            frame_rate: self.frame_rate,
            cameras: self.cameras()?,
            drift: vec![0.0; t_count],
            params,
        })
    }
}

fn swim(
    path: &SwimPath,
    template: &TemplateModel,
    frames: usize,
    frame_rate: f64,
) -> (Vec<Vec<[f64; 3]>>, Vec<[f64; 3]>) {
    let m = template.num_groups();
    let find = |name: &str| template.tree.group_names.iter().position(|g| g == name);
    let (peduncle, fluke) = (find("peduncle"), find("fluke"));
    let dt = 1.0 / frame_rate;
    let mut pos = path.start;
    let mut theta = Vec::with_capacity(frames);
    let mut position = Vec::with_capacity(frames);
    for t in 0..frames {
        let time = t as f64 * dt;
        let yaw = path.heading + path.turn_rate * time;
        if t > 0 {
            pos[0] += path.speed * dt * yaw.sin();
            pos[2] += path.speed * dt * yaw.cos();
        }
        let mut row = vec![[0.0; 3]; m];
        row[0] = [0.0, yaw, 0.0];
        let phase = 2.0 * PI * path.fluke_frequency * time;
        if let Some(g) = peduncle.filter(|&g| g > 0) {
            row[g] = [path.fluke_amplitude * phase.sin(), 0.0, 0.0];
        }
        if let Some(g) = fluke.filter(|&g| g > 0) {
            row[g] = [path.fluke_amplitude * (phase - PI / 2.0).sin(), 0.0, 0.0];
        }
        theta.push(row);
        position.push(pos);
    }
    (theta, position)
}

/// One generated frame, before and after noise.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthFrame {
    pub clean_image: Vec<[f64; 3]>,
    pub clean_mask: Vec<f64>,
    pub image: Vec<[f64; 3]>,
    pub mask: Vec<f64>,
}

/// Raster settings of generated frames.
pub fn synth_raster() -> RasterSettings {
    RunConfig::default().raster()
}

/// Renders every frame of `gt` and applies the spec's noise. Each frame has
/// its own random stream, so the result does not depend on scheduling.
pub fn render_frames(
    spec: &SceneSpec,
    template: &TemplateModel,
    gt: &ParamsFile,
) -> Result<Vec<SynthFrame>, PipelineError> {
    let raster = synth_raster();
    (0..spec.frames)
        .into_par_iter()
        .map(|t| {
            let b = render_params(
                template,
                gt,
                t,
                &gt.cameras[t],
                &raster,
                Background::Constant(spec.background),
            )?;
            let clean_mask: Vec<f64> = b.soft_mask.iter().map(|&s| f64::from(s >= 0.5)).collect();
            let clean_image = b.filtered;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(t as u64);
            let mask = clean_mask
                .iter()
                .map(|&m| {
                    if spec.mask_flip_rate > 0.0 && rng.random_bool(spec.mask_flip_rate) {
                        1.0 - m
                    } else {
                        m
                    }
                })
                .collect();
            let image = if spec.image_sigma > 0.0 {
                let normal =
                    Normal::new(0.0, spec.image_sigma).map_err(|e| invalid(e.to_string()))?;
                clean_image
                    .iter()
                    .map(|c| c.map(|x| (x + normal.sample(&mut rng)).clamp(0.0, 1.0)))
                    .collect()
            } else {
                clean_image.clone()
            };
            Ok(SynthFrame {
                clean_image,
                clean_mask,
                image,
                mask,
            })
        })
        .collect()
}

/// Writes `frames/`, `masks/`, `altitude.csv`, `camera.json` and
/// `groundtruth.json` under `out`, and returns the ground truth.
pub fn generate_scene(
    spec: &SceneSpec,
    template: &TemplateModel,
    out: &Path,
) -> Result<ParamsFile, PipelineError> {
    let gt = spec.ground_truth(template)?;
    let frames = render_frames(spec, template, &gt)?;
    let io =
        |p: &Path, e: &dyn std::fmt::Display| PipelineError::Io(format!("{}: {e}", p.display()));
    let (frame_dir, mask_dir) = (out.join("frames"), out.join("masks"));
    for d in [out, &frame_dir, &mask_dir] {
        std::fs::create_dir_all(d).map_err(|e| io(d, &e))?;
    }
    let [h, w] = spec.resolution;
    frames.par_iter().enumerate().try_for_each(|(t, f)| {
        write_rgb(&frame_dir.join(frame_name(t)), h, w, &f.image)?;
        write_mask(&mask_dir.join(frame_name(t)), h, w, &f.mask)
    })?;

    let path = out.join("altitude.csv");
    let mut csv = csv::Writer::from_path(&path).map_err(|e| io(&path, &e))?;
    csv.write_record(["frame_index", "altitude_m"])
        .map_err(|e| io(&path, &e))?;
    for t in 0..spec.frames {
        csv.write_record([t.to_string(), spec.altitude_at(t).to_string()])
            .map_err(|e| io(&path, &e))?;
    }
    csv.flush().map_err(|e| io(&path, &e))?;

    let camera = CameraInfo {
        sensor_width_mm: spec.sensor_width_mm,
        focal_length_mm: spec.focal_length_mm,
        frame_rate: spec.frame_rate,
    };
    let path = out.join("camera.json");
    let text = serde_json::to_string_pretty(&camera).map_err(|e| io(&path, &e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io(&path, &e))?;
    gt.write(&out.join("groundtruth.json"))
        .map_err(PipelineError::Io)?;
    Ok(gt)
}

/// How far an estimate is from the ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// m^3
    pub volume_gt: f64,
    /// m^3
    pub volume_est: f64,
    /// `|V_est - V_gt| / V_gt`
    pub volume_rel_error: f64,
    /// Mean over frames of the hard-mask IoU, both rendered with the
    /// ground-truth cameras.
    pub mean_iou: f64,
    /// m, over drift-corrected positions.
    pub trajectory_rmse: f64,
    /// rad, mean geodesic distance between global orientations.
    pub orientation_error: f64,
}

/// IoU of two binary masks; 1 when both are empty.
pub fn mask_iou(a: &[f64], b: &[f64]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x >= 0.5, y >= 0.5);
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Angle of the rotation taking `a` to `b`, both Rodrigues vectors.
pub fn geodesic_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let r = mat_mul(&transpose(&rodrigues(a)), &rodrigues(b));
    let tr = r[0][0] + r[1][1] + r[2][2];
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

pub fn compare_recovery(
    template: &TemplateModel,
    gt: &ParamsFile,
    est: &ParamsFile,
    raster: &RasterSettings,
) -> Result<RecoveryReport, PipelineError> {
    let t_count = gt.params.frames();
    if est.params.frames() != t_count {
        return Err(invalid(format!(
            "ground truth has {t_count} frames, estimate {}",
            est.params.frames()
        )));
    }
    gt.params.check(template)?;
    est.params.check(template)?;

    let volume = |p: &ParamsFile| -> Result<f64, PipelineError> {
        let (v, _) = rest_mesh(template, &p.params.beta)?;
        Ok(mesh_volume(&v, &template.faces)?)
    };
    let (volume_gt, volume_est) = (volume(gt)?, volume(est)?);

    let ious = (0..t_count)
        .into_par_iter()
        .map(|t| {
            let cam = &gt.cameras[t];
            let bg = Background::Constant([0.0; 3]);
            let a = render_params(template, gt, t, cam, raster, bg)?;
            let b = render_params(template, est, t, cam, raster, bg)?;
            Ok(mask_iou(&a.hard_mask, &b.hard_mask))
        })
        .collect::<Result<Vec<f64>, PipelineError>>()?;
    let mean_iou = ious.iter().sum::<f64>() / t_count as f64;

    let (pg, pe) = (gt.effective_positions(), est.effective_positions());
    let sq: f64 = pg
        .iter()
        .zip(&pe)
        .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>())
        .sum();
    let trajectory_rmse = (sq / t_count as f64).sqrt();

    let orientation_error = gt
        .params
        .theta
        .iter()
        .zip(&est.params.theta)
        .map(|(a, b)| geodesic_angle(a[0], b[0]))
        .sum::<f64>()
        / t_count as f64;

    Ok(RecoveryReport {
        volume_gt,
        volume_est,
        volume_rel_error: (volume_est - volume_gt).abs() / volume_gt,
        mean_iou,
        trajectory_rmse,
        orientation_error,
    })
}
