//! Optimizable scene parameters and their on-disk form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::body::{
    load_template, pose_mesh, procedural::reference_template, rest_length, shaped_body, BodyError,
    TemplateModel,
};
use crate::geom::{lift3, V3};
use crate::render::{default_lobes, Camera, SgLobe, Texture};

/// Everything the optimizer adjusts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams {
    /// `M x 4` part scale coefficients.
    pub beta: Vec<[f64; 4]>,
    /// `T x M` Rodrigues vectors; row 0 of each frame is the global orientation.
    pub theta: Vec<Vec<[f64; 3]>>,
    /// `T` root translations (m).
    pub position: Vec<[f64; 3]>,
    pub albedo: Texture,
    pub water: [f64; 3],
    pub lobes: Vec<SgLobe>,
}

impl SceneParams {
    /// Neutral parameters: zero shape and pose, mid-gray albedo and water.
    pub fn neutral(frames: usize, groups: usize, albedo: (usize, usize), lobes: usize) -> Self {
        SceneParams {
            beta: vec![[0.0; 4]; groups],
            theta: vec![vec![[0.0; 3]; groups]; frames],
            position: vec![[0.0; 3]; frames],
            albedo: Texture::constant(albedo.0, albedo.1, 0.5),
            water: [0.5; 3],
            lobes: default_lobes(lobes),
        }
    }

    pub fn frames(&self) -> usize {
        self.position.len()
    }

    pub fn check(&self, template: &TemplateModel) -> Result<(), BodyError> {
        let m = template.num_groups();
        let dim = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(BodyError::Dimension {
                    what,
                    expected,
                    got,
                })
            }
        };
        dim("beta rows", m, self.beta.len())?;
        dim("theta frames", self.position.len(), self.theta.len())?;
        for row in &self.theta {
            dim("theta rows", m, row.len())?;
        }
        dim(
            "albedo texels",
            self.albedo.height * self.albedo.width,
            self.albedo.data.len(),
        )?;
        let finite = self.beta.iter().flatten().all(|x| x.is_finite())
            && self.theta.iter().flatten().flatten().all(|x| x.is_finite())
            && self.position.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Err(BodyError::NonFinite("scene parameters"));
        }
        Ok(())
    }

    /// All entries in a fixed order: theta, beta, position, albedo, water,
    /// then per lobe amplitude, axis and sharpness.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(self.theta.iter().flatten().flatten());
        out.extend(self.beta.iter().flatten());
        out.extend(self.position.iter().flatten());
        out.extend(&self.albedo.data);
        out.extend(self.water);
        for l in &self.lobes {
            out.push(l.amplitude);
            out.extend(l.axis);
            out.push(l.sharpness);
        }
        out
    }

    /// Inverse of [`SceneParams::to_flat`] onto a copy of `self`'s shape.
    pub fn with_flat(&self, flat: &[f64]) -> SceneParams {
        let mut p = self.clone();
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("flat vector too short");
        for row in p.theta.iter_mut().flatten() {
            *row = [next(), next(), next()];
        }
        for row in &mut p.beta {
            *row = [next(), next(), next(), next()];
        }
        for row in &mut p.position {
            *row = [next(), next(), next()];
        }
        for x in &mut p.albedo.data {
            *x = next();
        }
        p.water = [next(), next(), next()];
        for l in &mut p.lobes {
            l.amplitude = next();
            l.axis = [next(), next(), next()];
            l.sharpness = next();
        }
        p
    }
}

/// Template asset files; absent means the built-in reference dolphin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatePaths {
    pub mesh: PathBuf,
    pub rig: PathBuf,
}

pub fn load_template_source(paths: Option<&TemplatePaths>) -> Result<TemplateModel, BodyError> {
    match paths {
        Some(p) => load_template(&p.mesh, &p.rig),
        None => reference_template(),
    }
}

/// Parameter file written by reconstruction and by the synthetic harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub template: Option<TemplatePaths>,
    pub frame_rate: f64,
    /// Camera of every frame at the raster the parameters were fitted on.
    pub cameras: Vec<Camera>,
    /// Non-optimized height offset of every frame (m).
    pub drift: Vec<f64>,
    pub params: SceneParams,
}

impl ParamsFile {
    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let file: ParamsFile =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let t = file.params.frames();
        if file.cameras.len() != t || file.drift.len() != t {
            return Err(format!(
                "{}: {t} frames but {} cameras and {} drift values",
                path.display(),
                file.cameras.len(),
                file.drift.len()
            ));
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
    }

    /// World positions actually rendered: translation plus height drift.
    pub fn effective_positions(&self) -> Vec<[f64; 3]> {
        self.params
            .position
            .iter()
            .zip(&self.drift)
            .map(|(p, d)| [p[0], p[1] + d, p[2]])
            .collect()
    }
}

/// Posed vertices of one frame.
pub fn posed_vertices<S: Real>(
    template: &TemplateModel,
    beta: &[[S; 4]],
    theta_t: &[V3<S>],
    position: V3<S>,
) -> Result<Vec<V3<S>>, BodyError> {
    let body = shaped_body(template, beta)?;
    pose_mesh(template, &body, theta_t, position)
}

/// Rest-pose shaped mesh and its body length.
pub fn rest_mesh(
    template: &TemplateModel,
    beta: &[[f64; 4]],
) -> Result<(Vec<[f64; 3]>, f64), BodyError> {
    let body = shaped_body(template, beta)?;
    let bl = rest_length(&body.vertices, template.landmarks)?;
    Ok((body.vertices, bl))
}

/// Posed vertices of frame `t` with its drift applied.
pub fn frame_vertices(
    template: &TemplateModel,
    file: &ParamsFile,
    t: usize,
) -> Result<Vec<[f64; 3]>, BodyError> {
    let p = &file.params;
    let pos = [
        p.position[t][0],
        p.position[t][1] + file.drift[t],
        p.position[t][2],
    ];
    posed_vertices(template, &p.beta, &p.theta[t], lift3(pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::procedural::toy_template;

    #[test]
    fn flat_round_trip() {
        let mut p = SceneParams::neutral(3, 2, (4, 5), 2);
        p.theta[2][1] = [0.1, 0.2, 0.3];
        p.beta[1] = [0.5, -0.1, 0.0, 0.2];
        p.position[1] = [1.0, -0.2, 3.0];
        p.albedo.data[7] = 0.9;
        p.lobes[1].sharpness = 4.0;
        let flat = p.to_flat();
        assert_eq!(flat.len(), 3 * 2 * 3 + 2 * 4 + 3 * 3 + 20 + 3 + 2 * 5);
        assert_eq!(p.with_flat(&flat), p);
    }

    #[test]
    fn params_file_round_trip() {
        let template = toy_template().unwrap();
        let p = SceneParams::neutral(2, template.num_groups(), (2, 2), 3);
        p.check(&template).unwrap();
        let cam = crate::render::camera_from_drone(17.27, 12.29, 10.0, (20, 30)).unwrap();
        let file = ParamsFile {
            template: None,
            frame_rate: 50.0,
            cameras: vec![cam; 2],
            drift: vec![0.0, 0.132],
            params: p,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        file.write(&path).unwrap();
        assert_eq!(ParamsFile::read(&path).unwrap(), file);
        assert_eq!(file.effective_positions()[1], [0.0, 0.132, 0.0]);
    }

    #[test]
    fn wrong_shapes_are_reported() {
        let template = toy_template().unwrap();
        let mut p = SceneParams::neutral(2, template.num_groups(), (2, 2), 3);
        p.theta[1].pop();
        assert!(matches!(
            p.check(&template),
            Err(BodyError::Dimension {
                what: "theta rows",
                ..
            })
        ));
        let mut p = SceneParams::neutral(2, template.num_groups(), (2, 2), 3);
        p.position[0][2] = f64::NAN;
        assert!(p.check(&template).is_err());
    }
}
