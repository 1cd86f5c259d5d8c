//! Metric nadir camera, soft rasterizer, spherical-Gaussian shading and the
//! water transmission filter.

mod camera;
mod init;
mod raster;
mod shading;

pub use camera::{camera_from_drone, field_of_view, project, Camera, Projected};
pub use init::{
    init_position_from_mask, interpolate_missing, largest_component, mask_centroid, principal_axis,
    yaw_toward, MaskAxis,
};
pub use raster::{
    barycentric, soft_coverage, supersampled_coverage, triangle_dist2, visibility, Coverage,
    RasterSettings, Shaded, Shader, NO_FACE,
};
pub use shading::{
    apply_water_filter, clamp01, default_lobes, radiance, sample_bilinear, water_transmission,
    Albedo, Lobe, SgLobe, TapedTexture, Texture,
};

use crate::autodiff::Real;
use crate::geom::{value3, vertex_normals, V3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("vertex {0} is at or above the camera")]
    AboveCamera(usize),
    #[error("empty mask")]
    EmptyMask,
    #[error("{what}: expected {expected} values, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Color behind the body in rendered frames.
#[derive(Clone, Copy, Debug)]
pub enum Background<'a> {
    Constant([f64; 3]),
    Image(&'a [[f64; 3]]),
}

impl Background<'_> {
    fn at(&self, pixel: usize) -> [f64; 3] {
        match self {
            Background::Constant(c) => *c,
            Background::Image(img) => img[pixel],
        }
    }
}

/// Everything needed to render one frame besides the camera.
pub struct Scene<'a, S, A: ?Sized> {
    pub vertices: &'a [V3<S>],
    pub faces: &'a [[u32; 3]],
    pub uv: &'a [[f64; 2]],
    pub albedo: &'a A,
    pub lobes: &'a [Lobe<S>],
    pub water: [S; 3],
}

/// Per-pixel render outputs, row-major.
#[derive(Clone, Debug)]
pub struct RenderBuffers<S> {
    pub width: usize,
    pub height: usize,
    pub face_id: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
    /// World height of the visible surface (negative under water).
    pub depth: Vec<f64>,
    pub hard_mask: Vec<f64>,
    pub soft_mask: Vec<S>,
    /// Unfiltered color; background where nothing is covered.
    pub color: Vec<[S; 3]>,
    /// Color after the water filter, composited over the background.
    pub filtered: Vec<[S; 3]>,
}

/// Projects, rasterizes and shades one frame.
pub fn render<S: Real, A: Albedo<S> + ?Sized>(
    camera: &Camera,
    scene: &Scene<'_, S, A>,
    settings: &RasterSettings,
    background: Background<'_>,
) -> Result<RenderBuffers<S>, RenderError> {
    let (w, h) = (camera.width, camera.height);
    if let Background::Image(img) = background {
        if img.len() != w * h {
            return Err(RenderError::Dimension {
                what: "background",
                expected: w * h,
                got: img.len(),
            });
        }
    }
    if scene.uv.len() != scene.vertices.len() {
        return Err(RenderError::Dimension {
            what: "uv",
            expected: scene.vertices.len(),
            got: scene.uv.len(),
        });
    }
    let proj = project(camera, scene.vertices)?;
    let screen_values: Vec<[f64; 2]> = proj
        .screen
        .iter()
        .map(|p| [p[0].value(), p[1].value()])
        .collect();
    let height_values: Vec<f64> = proj.height.iter().map(|y| y.value()).collect();
    let cov = visibility(&screen_values, &height_values, scene.faces, w, h, settings);

    let mut soft_mask: Vec<S> = cov.soft.iter().map(|&s| S::from(s)).collect();
    for (pix, candidates) in &cov.boundary {
        let p = pixel_center(*pix as usize, w);
        soft_mask[*pix as usize] =
            soft_coverage(p, candidates, scene.faces, &proj.screen, cov.inv_sigma_px);
    }

    let normals = vertex_normals(scene.vertices, scene.faces);
    let shader = Shader {
        faces: scene.faces,
        screen: &proj.screen,
        height: &proj.height,
        normals: &normals,
        uv: scene.uv,
        albedo: scene.albedo,
        lobes: scene.lobes,
        water: scene.water,
    };
    let mut color: Vec<[S; 3]> = (0..w * h).map(|i| background.at(i).map(S::from)).collect();
    let mut filtered = color.clone();
    for pix in cov.covered() {
        let s = shader.shade(pixel_center(pix, w), cov.face_id[pix]);
        color[pix] = [s.color; 3];
        filtered[pix] = s.filtered;
    }

    Ok(RenderBuffers {
        width: w,
        height: h,
        hard_mask: cov.hard_mask(),
        face_id: cov.face_id,
        bary: cov.bary,
        depth: cov.depth,
        soft_mask,
        color,
        filtered,
    })
}

fn pixel_center(index: usize, width: usize) -> [f64; 2] {
    [(index % width) as f64 + 0.5, (index / width) as f64 + 0.5]
}

/// Plain-number copy of taped buffers.
pub fn buffer_values<S: Real>(b: &RenderBuffers<S>) -> RenderBuffers<f64> {
    RenderBuffers {
        width: b.width,
        height: b.height,
        face_id: b.face_id.clone(),
        bary: b.bary.clone(),
        depth: b.depth.clone(),
        hard_mask: b.hard_mask.clone(),
        soft_mask: b.soft_mask.iter().map(|s| s.value()).collect(),
        color: b.color.iter().map(|c| c.map(|x| x.value())).collect(),
        filtered: b.filtered.iter().map(|c| c.map(|x| x.value())).collect(),
    }
}

/// World-space vertices as plain numbers.
pub fn vertex_values<S: Real>(v: &[V3<S>]) -> Vec<[f64; 3]> {
    v.iter().map(value3).collect()
}
