//! Loss evaluation over a whole sequence and the optimization loop.

use rayon::prelude::*;

use crate::autodiff::{Constraint, ParamGroup, Real, Tape, Var};
use crate::body::{check_closed, TemplateModel};
use crate::geom::V3;
use crate::morpho::{mesh_volume, predicted_mass, MassEstimate, MassModel};
use crate::objectives::{
    drift_offsets, loss_direction, loss_mask_iou, loss_pose, loss_rgb, loss_scale, loss_scale_axes,
    loss_scale_smooth, loss_smooth_temporal, total_loss, LossTerms, LossWeights, Term, TERM_COUNT,
};
use crate::render::{
    camera_from_drone, render, Albedo, Background, Camera, Lobe, RasterSettings, RenderBuffers,
    Scene, TapedTexture,
};
use crate::scene::{posed_vertices, rest_mesh, ParamsFile, SceneParams};

use super::init::initialize;
use super::{Observations, PipelineError, RunConfig};

/// A sequence to fit: template, observations at the fitting raster, and the
/// matching cameras.
pub struct Problem<'a> {
    pub template: &'a TemplateModel,
    pub observations: &'a Observations,
    pub cameras: Vec<Camera>,
    pub weights: LossWeights,
    pub raster: RasterSettings,
    group_parents: Vec<Option<usize>>,
}

/// Loss breakdown and gradient of one evaluation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub terms: LossTerms<f64>,
    pub total: f64,
    pub gradient: SceneParams,
}

/// Cameras of every frame at `(height, width)`.
pub fn sequence_cameras(
    observations: &Observations,
    sensor_width_mm: f64,
    focal_length_mm: f64,
    resolution: (usize, usize),
) -> Result<Vec<Camera>, PipelineError> {
    observations
        .frames
        .iter()
        .map(|f| {
            camera_from_drone(sensor_width_mm, focal_length_mm, f.altitude, resolution)
                .map_err(Into::into)
        })
        .collect()
}

impl<'a> Problem<'a> {
    pub fn new(
        template: &'a TemplateModel,
        observations: &'a Observations,
        cameras: Vec<Camera>,
        weights: LossWeights,
        raster: RasterSettings,
    ) -> Result<Self, PipelineError> {
        if cameras.len() != observations.frames.len() {
            return Err(PipelineError::Input(format!(
                "{} cameras for {} frames",
                cameras.len(),
                observations.frames.len()
            )));
        }
        if cameras
            .iter()
            .any(|c| (c.height, c.width) != (observations.height, observations.width))
        {
            return Err(PipelineError::Input(
                "camera raster differs from the observations".into(),
            ));
        }
        Ok(Problem {
            template,
            observations,
            cameras,
            weights,
            raster,
            group_parents: template.tree.group_parents(),
        })
    }

    pub fn frames(&self) -> usize {
        self.cameras.len()
    }

    /// Renders frame `t`.
    #[allow(clippy::too_many_arguments)]
    pub fn render_frame<S: Real, A: Albedo<S> + ?Sized>(
        &self,
        t: usize,
        beta: &[[S; 4]],
        theta_t: &[V3<S>],
        position: V3<S>,
        drift: f64,
        albedo: &A,
        water: [S; 3],
        lobes: &[Lobe<S>],
    ) -> Result<RenderBuffers<S>, PipelineError> {
        let pos = [position[0], position[1] + drift, position[2]];
        let vertices = posed_vertices(self.template, beta, theta_t, pos)?;
        let scene = Scene {
            vertices: &vertices,
            faces: &self.template.faces,
            uv: &self.template.uv,
            albedo,
            lobes,
            water,
        };
        let bg = Background::Image(&self.observations.frames[t].image);
        Ok(render(&self.cameras[t], &scene, &self.raster, bg)?)
    }

    /// Photometric and silhouette terms of frame `t`.
    #[allow(clippy::too_many_arguments)]
    pub fn frame_terms<S: Real, A: Albedo<S> + ?Sized>(
        &self,
        t: usize,
        beta: &[[S; 4]],
        theta_t: &[V3<S>],
        position: V3<S>,
        drift: f64,
        albedo: &A,
        water: [S; 3],
        lobes: &[Lobe<S>],
    ) -> Result<(S, S), PipelineError> {
        let b = self.render_frame(t, beta, theta_t, position, drift, albedo, water, lobes)?;
        let obs = &self.observations.frames[t];
        let rgb = loss_rgb(&b.filtered, &obs.image, &b.hard_mask)?;
        let mask = loss_mask_iou(&b.soft_mask, &obs.mask)?;
        Ok((rgb, mask))
    }

    /// Regularizers and cross-frame terms; zero for the two data terms.
    pub fn sequence_terms<S: Real>(
        &self,
        beta: &[[S; 4]],
        theta: &[Vec<V3<S>>],
        position: &[V3<S>],
        drift: &[f64],
    ) -> Result<LossTerms<S>, PipelineError> {
        let mut terms = LossTerms::<S>::zero();
        terms[Term::Pose] = loss_pose(theta);
        terms[Term::Scale] = loss_scale(beta);
        terms[Term::ScaleAxes] = loss_scale_axes(beta);
        terms[Term::ScaleSmooth] = loss_scale_smooth(beta, &self.group_parents)?;
        let series = |f: &dyn Fn(usize) -> Vec<S>| (0..position.len()).map(f).collect::<Vec<_>>();
        terms[Term::SmoothPos] = loss_smooth_temporal(&series(&|t| position[t].to_vec()))?;
        terms[Term::SmoothRot] = loss_smooth_temporal(&series(&|t| theta[t][0].to_vec()))?;
        terms[Term::SmoothPose] = loss_smooth_temporal(&series(&|t| {
            theta[t][1..].iter().flatten().copied().collect()
        }))?;
        if self.weights.direction != 0.0 {
            let moved: Vec<V3<S>> = position
                .iter()
                .zip(drift)
                .map(|(p, &d)| [p[0], p[1] + d, p[2]])
                .collect();
            let global: Vec<V3<S>> = theta.iter().map(|row| row[0]).collect();
            terms[Term::Direction] = loss_direction(&global, &moved)?;
        }
        Ok(terms)
    }

    fn check_drift(&self, params: &SceneParams, drift: &[f64]) -> Result<(), PipelineError> {
        params.check(self.template)?;
        if params.frames() != self.frames() || drift.len() != self.frames() {
            return Err(PipelineError::Input(format!(
                "{} frames observed, parameters for {}, drift for {}",
                self.frames(),
                params.frames(),
                drift.len()
            )));
        }
        Ok(())
    }

    /// All raw terms with plain numbers.
    pub fn evaluate(
        &self,
        params: &SceneParams,
        drift: &[f64],
    ) -> Result<LossTerms<f64>, PipelineError> {
        self.check_drift(params, drift)?;
        let mut terms =
            self.sequence_terms(&params.beta, &params.theta, &params.position, drift)?;
        let per_frame: Vec<Result<(f64, f64), PipelineError>> = (0..self.frames())
            .into_par_iter()
            .map(|t| {
                self.frame_terms(
                    t,
                    &params.beta,
                    &params.theta[t],
                    params.position[t],
                    drift[t],
                    &params.albedo,
                    params.water,
                    &params.lobes,
                )
            })
            .collect();
        for r in per_frame {
            let (rgb, mask) = r?;
            terms[Term::Rgb] += rgb;
            terms[Term::Mask] += mask;
        }
        Ok(terms)
    }

    /// Weighted total with plain numbers.
    pub fn total(&self, params: &SceneParams, drift: &[f64]) -> Result<f64, PipelineError> {
        Ok(total_loss(&self.evaluate(params, drift)?, &self.weights)?)
    }

    fn frame_gradient(
        &self,
        t: usize,
        params: &SceneParams,
        drift: f64,
    ) -> Result<FrameGradient, PipelineError> {
        let tape = Tape::new();
        let beta: Vec<[Var; 4]> = params.beta.iter().map(|r| r.map(|x| tape.var(x))).collect();
        let theta: Vec<V3<Var>> = params.theta[t]
            .iter()
            .map(|r| r.map(|x| tape.var(x)))
            .collect();
        let pos: V3<Var> = params.position[t].map(|x| tape.var(x));
        let water: [Var; 3] = params.water.map(|x| tape.var(x));
        let lobes: Vec<Lobe<Var>> = params
            .lobes
            .iter()
            .map(|l| Lobe {
                amplitude: tape.var(l.amplitude),
                axis: l.axis.map(|x| tape.var(x)),
                sharpness: tape.var(l.sharpness),
            })
            .collect();
        let albedo = TapedTexture::new(&params.albedo, &tape);
        let (rgb, mask) = self.frame_terms(t, &beta, &theta, pos, drift, &albedo, water, &lobes)?;
        let objective = rgb * self.weights.rgb + mask * self.weights.mask;

        let mut g = FrameGradient {
            rgb: rgb.value(),
            mask: mask.value(),
            ..FrameGradient::default()
        };
        if objective.is_constant() {
            return Ok(g);
        }
        let grads = tape.gradient(&[objective])?;
        g.beta = beta.iter().map(|r| r.map(|v| grads.wrt(v))).collect();
        g.theta = theta.iter().map(|r| r.map(|v| grads.wrt(v))).collect();
        g.position = pos.map(|v| grads.wrt(v));
        g.water = water.map(|v| grads.wrt(v));
        g.lobes = lobes
            .iter()
            .map(|l| Lobe {
                amplitude: grads.wrt(l.amplitude),
                axis: l.axis.map(|v| grads.wrt(v)),
                sharpness: grads.wrt(l.sharpness),
            })
            .collect();
        g.texels = albedo
            .leaves()
            .into_iter()
            .map(|(i, v)| (i, grads.wrt(v)))
            .collect();
        Ok(g)
    }

    /// Raw terms, weighted total, and the gradient of the total.
    pub fn gradient(
        &self,
        params: &SceneParams,
        drift: &[f64],
    ) -> Result<Evaluation, PipelineError> {
        self.check_drift(params, drift)?;
        let t_count = self.frames();

        // Cross-frame terms on their own tape.
        let tape = Tape::new();
        let beta: Vec<[Var; 4]> = params.beta.iter().map(|r| r.map(|x| tape.var(x))).collect();
        let theta: Vec<Vec<V3<Var>>> = params
            .theta
            .iter()
            .map(|f| f.iter().map(|r| r.map(|x| tape.var(x))).collect())
            .collect();
        let pos: Vec<V3<Var>> = params
            .position
            .iter()
            .map(|r| r.map(|x| tape.var(x)))
            .collect();
        let seq = self.sequence_terms(&beta, &theta, &pos, drift)?;
        let mut weighted = LossTerms::<Var>::zero();
        for term in Term::ALL {
            if !matches!(term, Term::Rgb | Term::Mask) {
                weighted[term] = seq[term];
            }
        }
        let seq_total = total_loss(&weighted, &self.weights)?;
        let mut gradient = zero_like(params);
        if !seq_total.is_constant() {
            let grads = tape.gradient(&[seq_total])?;
            for (dst, src) in gradient.beta.iter_mut().zip(&beta) {
                *dst = src.map(|v| grads.wrt(v));
            }
            for (df, sf) in gradient.theta.iter_mut().zip(&theta) {
                for (dst, src) in df.iter_mut().zip(sf) {
                    *dst = src.map(|v| grads.wrt(v));
                }
            }
            for (dst, src) in gradient.position.iter_mut().zip(&pos) {
                *dst = src.map(|v| grads.wrt(v));
            }
        }
        let mut terms = seq.values();

        let per_frame: Vec<_> = (0..t_count)
            .into_par_iter()
            .map(|t| self.frame_gradient(t, params, drift[t]))
            .collect();
        // Reduce in frame order so results do not depend on scheduling.
        for (t, r) in per_frame.into_iter().enumerate() {
            let g = r?;
            terms[Term::Rgb] += g.rgb;
            terms[Term::Mask] += g.mask;
            for (a, b) in gradient.beta.iter_mut().zip(&g.beta) {
                for k in 0..4 {
                    a[k] += b[k];
                }
            }
            for (a, b) in gradient.theta[t].iter_mut().zip(&g.theta) {
                for k in 0..3 {
                    a[k] += b[k];
                }
            }
            for k in 0..3 {
                gradient.position[t][k] += g.position[k];
                gradient.water[k] += g.water[k];
            }
            for (a, b) in gradient.lobes.iter_mut().zip(&g.lobes) {
                a.amplitude += b.amplitude;
                a.sharpness += b.sharpness;
                for k in 0..3 {
                    a.axis[k] += b.axis[k];
                }
            }
            for (i, d) in g.texels {
                gradient.albedo.data[i] += d;
            }
        }
        let total = total_loss(&terms, &self.weights)?;
        Ok(Evaluation {
            terms,
            total,
            gradient,
        })
    }
}

/// Gradient contribution of one frame's data terms.
#[derive(Default)]
struct FrameGradient {
    rgb: f64,
    mask: f64,
    beta: Vec<[f64; 4]>,
    theta: Vec<[f64; 3]>,
    position: [f64; 3],
    water: [f64; 3],
    lobes: Vec<Lobe<f64>>,
    texels: Vec<(usize, f64)>,
}

fn zero_like(p: &SceneParams) -> SceneParams {
    let mut z = p.clone();
    for r in &mut z.beta {
        *r = [0.0; 4];
    }
    for r in z.theta.iter_mut().flatten() {
        *r = [0.0; 3];
    }
    for r in &mut z.position {
        *r = [0.0; 3];
    }
    z.albedo.data.iter_mut().for_each(|x| *x = 0.0);
    z.water = [0.0; 3];
    for l in &mut z.lobes {
        l.amplitude = 0.0;
        l.axis = [0.0; 3];
        l.sharpness = 0.0;
    }
    z
}

/// Adam state for every parameter group.
pub struct Optimizer {
    theta: ParamGroup,
    beta: ParamGroup,
    position: ParamGroup,
    albedo: ParamGroup,
    water: ParamGroup,
    sg_amplitude: ParamGroup,
    sg_axis: ParamGroup,
    sg_sharpness: ParamGroup,
}

/// Sharpness is kept at least this large.
pub const MIN_SHARPNESS: f64 = 1e-4;

impl Optimizer {
    pub fn new(params: &SceneParams, config: &RunConfig) -> Self {
        let t = params.frames();
        let m = params.beta.len();
        let k = params.lobes.len();
        let open = Constraint::Box {
            lo: 0.0,
            hi: f64::INFINITY,
        };
        Optimizer {
            theta: ParamGroup::new("theta", t * m * 3, config.lr_theta, Constraint::Free),
            beta: ParamGroup::new("beta", m * 4, config.lr_beta_p, Constraint::Free),
            position: ParamGroup::new("position", t * 3, config.lr_beta_p, Constraint::Free),
            albedo: ParamGroup::new(
                "albedo",
                params.albedo.data.len(),
                config.lr_appearance,
                Constraint::UNIT,
            ),
            water: ParamGroup::new("water", 3, config.lr_appearance, Constraint::UNIT),
            sg_amplitude: ParamGroup::new("sg_amplitude", k, config.lr_sg, open),
            sg_axis: ParamGroup::new("sg_axis", k * 3, config.lr_sg, Constraint::Free),
            sg_sharpness: ParamGroup::new(
                "sg_sharpness",
                k,
                config.lr_sg,
                Constraint::Box {
                    lo: MIN_SHARPNESS,
                    hi: f64::INFINITY,
                },
            ),
        }
    }

    pub fn step(&mut self, p: &mut SceneParams, g: &SceneParams) -> Result<(), PipelineError> {
        fn run<const N: usize>(
            group: &mut ParamGroup,
            rows: &mut [[f64; N]],
            grads: &[[f64; N]],
        ) -> Result<(), PipelineError> {
            let mut flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let g: Vec<f64> = grads.iter().flatten().copied().collect();
            group.step(&mut flat, &g)?;
            for (row, chunk) in rows.iter_mut().zip(flat.chunks_exact(N)) {
                row.copy_from_slice(chunk);
            }
            Ok(())
        }
        let mut theta: Vec<[f64; 3]> = p.theta.iter().flatten().copied().collect();
        let theta_g: Vec<[f64; 3]> = g.theta.iter().flatten().copied().collect();
        run(&mut self.theta, &mut theta, &theta_g)?;
        let m = p.beta.len();
        for (frame, chunk) in p.theta.iter_mut().zip(theta.chunks_exact(m)) {
            frame.copy_from_slice(chunk);
        }
        run(&mut self.beta, &mut p.beta, &g.beta)?;
        run(&mut self.position, &mut p.position, &g.position)?;
        self.albedo.step(&mut p.albedo.data, &g.albedo.data)?;
        run(
            &mut self.water,
            std::slice::from_mut(&mut p.water),
            &[g.water],
        )?;

        let mut amp: Vec<[f64; 1]> = p.lobes.iter().map(|l| [l.amplitude]).collect();
        let mut axis: Vec<[f64; 3]> = p.lobes.iter().map(|l| l.axis).collect();
        let mut sharp: Vec<[f64; 1]> = p.lobes.iter().map(|l| [l.sharpness]).collect();
        run(
            &mut self.sg_amplitude,
            &mut amp,
            &g.lobes.iter().map(|l| [l.amplitude]).collect::<Vec<_>>(),
        )?;
        run(
            &mut self.sg_axis,
            &mut axis,
            &g.lobes.iter().map(|l| l.axis).collect::<Vec<_>>(),
        )?;
        run(
            &mut self.sg_sharpness,
            &mut sharp,
            &g.lobes.iter().map(|l| [l.sharpness]).collect::<Vec<_>>(),
        )?;
        for (i, l) in p.lobes.iter_mut().enumerate() {
            l.amplitude = amp[i][0];
            l.axis = axis[i];
            l.sharpness = sharp[i][0];
        }
        Ok(())
    }
}

/// One row of the loss log.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub raw: [f64; TERM_COUNT],
    pub weighted: [f64; TERM_COUNT],
    pub total: f64,
}

/// Fitted parameters with everything derived from them.
#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub file: ParamsFile,
    pub losses: Vec<LossRecord>,
    /// Posed vertices of every frame, drift applied.
    pub meshes: Vec<Vec<[f64; 3]>>,
    /// Rest-pose shaped vertices.
    pub rest_vertices: Vec<[f64; 3]>,
    pub volume: f64,
    pub body_length: f64,
    pub mass: MassEstimate,
    /// Whether the direction term took part.
    pub direction_enabled: bool,
}

/// Starting parameters: neutral shape and appearance, positions from mask
/// centroids, headings from mask axes.
pub fn initial_params(
    observations: &Observations,
    cameras: &[Camera],
    template: &TemplateModel,
    config: &RunConfig,
) -> Result<(SceneParams, bool), PipelineError> {
    let init = initialize(observations, cameras, config.direction_disable_px)?;
    let a = config.albedo_resolution;
    let mut params = SceneParams::neutral(
        observations.frames.len(),
        template.num_groups(),
        (a[0], a[1]),
        config.sg_lobes,
    );
    params.position = init.position;
    for (row, yaw) in params.theta.iter_mut().zip(&init.yaw) {
        row[0] = [0.0, *yaw, 0.0];
    }
    Ok((params, init.moving))
}

fn current_drift(params: &SceneParams, config: &RunConfig, frame_rate: f64) -> Vec<f64> {
    if config.vertical_drift {
        let global: Vec<[f64; 3]> = params.theta.iter().map(|r| r[0]).collect();
        drift_offsets(&global, &config.drift_rates(frame_rate))
    } else {
        vec![0.0; params.frames()]
    }
}

/// Fits the template to a sequence. `observations` may be at any raster
/// with the configured aspect ratio.
pub fn run_reconstruction(
    observations: &Observations,
    template: &TemplateModel,
    config: &RunConfig,
) -> Result<ReconstructionResult, PipelineError> {
    config.validate()?;
    let (h, w) = config.fit_resolution();
    let obs = observations.resampled(h, w)?;
    let info = obs.camera;
    let cameras = sequence_cameras(&obs, info.sensor_width_mm, info.focal_length_mm, (h, w))?;
    let (mut params, moving) = initial_params(&obs, &cameras, template, config)?;

    let mut weights = config.weights();
    let direction_enabled = moving && weights.direction > 0.0;
    if !moving {
        weights.direction = 0.0;
    }
    let problem = Problem::new(template, &obs, cameras.clone(), weights, config.raster())?;
    let mut optimizer = Optimizer::new(&params, config);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let drift = current_drift(&params, config, info.frame_rate);
        let eval = problem.gradient(&params, &drift).map_err(|e| match e {
            PipelineError::Objective(crate::objectives::ObjectiveError::NonFinite(term)) => {
                PipelineError::NonFinite { epoch, term }
            }
            e => e,
        })?;
        losses.push(LossRecord {
            epoch,
            raw: eval.terms.values,
            weighted: eval.terms.weighted(&weights),
            total: eval.total,
        });
        optimizer.step(&mut params, &eval.gradient)?;
    }

    let drift = current_drift(&params, config, info.frame_rate);
    let file = ParamsFile {
        template: config.template_paths()?,
        frame_rate: info.frame_rate,
        cameras,
        drift,
        params,
    };
    finish(template, file, losses, direction_enabled)
}

/// Derives meshes and morphometrics from fitted parameters.
pub fn finish(
    template: &TemplateModel,
    file: ParamsFile,
    losses: Vec<LossRecord>,
    direction_enabled: bool,
) -> Result<ReconstructionResult, PipelineError> {
    let p = &file.params;
    let meshes = (0..p.frames())
        .map(|t| crate::scene::frame_vertices(template, &file, t))
        .collect::<Result<Vec<_>, _>>()?;
    for m in &meshes {
        if m.iter().flatten().any(|x| !x.is_finite()) {
            return Err(PipelineError::Input("posed mesh is not finite".into()));
        }
    }
    check_closed(&template.faces, template.num_vertices())?;
    let (rest_vertices, body_length) = rest_mesh(template, &p.beta)?;
    let volume = mesh_volume(&rest_vertices, &template.faces)?;
    let mass = predicted_mass(volume, body_length, &MassModel::default())?;
    Ok(ReconstructionResult {
        file,
        losses,
        meshes,
        rest_vertices,
        volume,
        body_length,
        mass,
        direction_enabled,
    })
}

/// Renders frame `t` of a parameter file at `camera`'s raster.
pub fn render_params(
    template: &TemplateModel,
    file: &ParamsFile,
    t: usize,
    camera: &Camera,
    raster: &RasterSettings,
    background: Background<'_>,
) -> Result<RenderBuffers<f64>, PipelineError> {
    let p = &file.params;
    let vertices = crate::scene::frame_vertices(template, file, t)?;
    let scene = Scene {
        vertices: &vertices,
        faces: &template.faces,
        uv: &template.uv,
        albedo: &p.albedo,
        lobes: &p.lobes,
        water: p.water,
    };
    Ok(render(camera, &scene, raster, background)?)
}
