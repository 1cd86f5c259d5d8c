use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::geom::V3;

use super::RenderError;

/// Horizontal field of view from sensor width and focal length (both mm).
pub fn field_of_view(sensor_width_mm: f64, focal_length_mm: f64) -> f64 {
    2.0 * (sensor_width_mm / (2.0 * focal_length_mm)).atan()
}

/// Pinhole camera at `(0, altitude, 0)` looking straight down.
///
/// Image columns follow world +x and rows follow world +z; the sensor width
/// spans the columns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub altitude: f64,
    pub sensor_width_mm: f64,
    pub focal_length_mm: f64,
    pub fov: f64,
    pub height: usize,
    pub width: usize,
}

/// Builds the camera for one frame. `resolution` is `(H_r, W_r)`.
pub fn camera_from_drone(
    sensor_width_mm: f64,
    focal_length_mm: f64,
    altitude: f64,
    resolution: (usize, usize),
) -> Result<Camera, RenderError> {
    for (name, v) in [
        ("sensor width", sensor_width_mm),
        ("focal length", focal_length_mm),
        ("altitude", altitude),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(RenderError::NonPositive(name));
        }
    }
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(RenderError::NonPositive("resolution"));
    }
    Ok(Camera {
        altitude,
        sensor_width_mm,
        focal_length_mm,
        fov: field_of_view(sensor_width_mm, focal_length_mm),
        height: resolution.0,
        width: resolution.1,
    })
}

impl Camera {
    pub fn center(&self) -> [f64; 3] {
        [0.0, self.altitude, 0.0]
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.width as f64 / (2.0 * (self.fov / 2.0).tan())
    }

    pub fn principal_point(&self) -> [f64; 2] {
        [self.width as f64 / 2.0, self.height as f64 / 2.0]
    }

    /// Pixels per meter for a horizontal object at world height `y`.
    pub fn pixels_per_meter(&self, y: f64) -> f64 {
        self.focal_px() / (self.altitude - y)
    }

    /// Same camera rendering at a different raster size.
    pub fn with_resolution(&self, height: usize, width: usize) -> Camera {
        Camera {
            height,
            width,
            ..*self
        }
    }

    /// World point at height `y` seen at pixel coordinates `(u, v)`.
    pub fn unproject(&self, uv: [f64; 2], y: f64) -> [f64; 3] {
        let s = (self.altitude - y) / self.focal_px();
        let c = self.principal_point();
        [(uv[0] - c[0]) * s, y, (uv[1] - c[1]) * s]
    }
}

/// Vertices in image space.
#[derive(Clone, Debug)]
pub struct Projected<S> {
    /// Pixel coordinates `(u, v)`; pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.
    pub screen: Vec<[S; 2]>,
    /// World height of every vertex, the quantity the water filter uses.
    pub height: Vec<S>,
}

/// Perspective projection onto the raster.
pub fn project<S: Real>(camera: &Camera, vertices: &[V3<S>]) -> Result<Projected<S>, RenderError> {
    let f = camera.focal_px();
    let [cu, cv] = camera.principal_point();
    let mut screen = Vec::with_capacity(vertices.len());
    let mut height = Vec::with_capacity(vertices.len());
    for (i, v) in vertices.iter().enumerate() {
        let below = S::from(camera.altitude) - v[1];
        if !(below.value() > 0.0) {
            return Err(RenderError::AboveCamera(i));
        }
        let s = S::from(f) / below;
        screen.push([v[0] * s + cu, v[2] * s + cv]);
        height.push(v[1]);
    }
    Ok(Projected { screen, height })
}
