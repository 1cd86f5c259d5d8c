//! Visibility pass and differentiable per-pixel evaluation.
//!
//! Rasterization runs in two steps. [`visibility`] works on plain numbers: it
//! z-buffers the nearest face per pixel and collects, for every pixel near
//! the silhouette, the `k` closest faces within the box length. The
//! per-pixel functions below then re-evaluate soft coverage and shading from
//! (possibly taped) vertex data for exactly those faces, so gradients flow
//! through barycentrics, distances and appearance without the discrete
//! choices themselves being differentiated.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::geom::{norm, scale, V3};

use super::shading::{clamp01, radiance, sample_bilinear, water_transmission, Albedo, Lobe};

/// Marks pixels no face covers.
pub const NO_FACE: u32 = u32::MAX;

/// Soft rasterizer knobs. `box_length` is in normalized device coordinates
/// (the raster width spans 2 units); `inv_sigma` scales squared NDC
/// distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterSettings {
    pub inv_sigma: f64,
    pub box_length: f64,
    pub k: usize,
}

impl Default for RasterSettings {
    fn default() -> Self {
        RasterSettings {
            inv_sigma: 100_000.0,
            box_length: 0.01,
            k: 40,
        }
    }
}

/// Output of the visibility pass.
#[derive(Clone, Debug)]
pub struct Coverage {
    pub width: usize,
    pub height: usize,
    pub face_id: Vec<u32>,
    /// Screen-space barycentrics of the visible face.
    pub bary: Vec<[f64; 3]>,
    /// World height of the visible surface; 0 where nothing is visible.
    pub depth: Vec<f64>,
    pub soft: Vec<f64>,
    /// Pixels with fractional soft coverage and their ranked candidate faces.
    pub boundary: Vec<(u32, Vec<u32>)>,
    /// `inv_sigma` converted to squared pixel distances.
    pub inv_sigma_px: f64,
}

impl Coverage {
    pub fn hard_mask(&self) -> Vec<f64> {
        self.face_id
            .iter()
            .map(|&f| if f == NO_FACE { 0.0 } else { 1.0 })
            .collect()
    }

    pub fn covered(&self) -> impl Iterator<Item = usize> + '_ {
        self.face_id
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != NO_FACE)
            .map(|(i, _)| i)
    }
}

fn cross2<S: Real>(a: [S; 2], b: [S; 2]) -> S {
    a[0] * b[1] - a[1] * b[0]
}

fn rel<S: Real>(a: [S; 2], p: [f64; 2]) -> [S; 2] {
    [a[0] - p[0], a[1] - p[1]]
}

/// Screen-space barycentrics of `p`; `None` for a degenerate triangle.
pub fn barycentric<S: Real>(p: [f64; 2], a: [S; 2], b: [S; 2], c: [S; 2]) -> Option<[S; 3]> {
    let (pa, pb, pc) = (rel(a, p), rel(b, p), rel(c, p));
    let e0 = cross2(pb, pc);
    let e1 = cross2(pc, pa);
    let e2 = cross2(pa, pb);
    let area = e0 + e1 + e2;
    if area.value() == 0.0 || !area.value().is_finite() {
        return None;
    }
    Some([e0 / area, e1 / area, e2 / area])
}

fn inside(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<[f64; 3]> {
    barycentric(p, a, b, c).filter(|w| w.iter().all(|&x| x >= 0.0))
}

fn segment_dist2<S: Real>(p: [f64; 2], a: [S; 2], b: [S; 2]) -> S {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [-(a[0] - p[0]), -(a[1] - p[1])];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let d = if len2.value() > 0.0 {
        let t = (ap[0] * ab[0] + ap[1] * ab[1]) / len2;
        if t.value() <= 0.0 {
            ap
        } else if t.value() >= 1.0 {
            [-(b[0] - p[0]), -(b[1] - p[1])]
        } else {
            [ap[0] - ab[0] * t, ap[1] - ab[1] * t]
        }
    } else {
        ap
    };
    d[0] * d[0] + d[1] * d[1]
}

/// Squared distance in pixels from `p` to the closest point of triangle
/// `abc`; zero inside.
pub fn triangle_dist2<S: Real>(p: [f64; 2], a: [S; 2], b: [S; 2], c: [S; 2]) -> S {
    let values = [a, b, c].map(|v| [v[0].value(), v[1].value()]);
    if inside(p, values[0], values[1], values[2]).is_some() {
        return S::zero();
    }
    let mut best = segment_dist2(p, a, b);
    for d in [segment_dist2(p, b, c), segment_dist2(p, c, a)] {
        if d.value() < best.value() {
            best = d;
        }
    }
    best
}

fn pixel_center(index: usize, width: usize) -> [f64; 2] {
    [(index % width) as f64 + 0.5, (index / width) as f64 + 0.5]
}

/// Soft coverage of one pixel from its candidate faces:
/// `1 - prod (1 - exp(-D^2 inv_sigma))`.
pub fn soft_coverage<S: Real>(
    p: [f64; 2],
    candidates: &[u32],
    faces: &[[u32; 3]],
    screen: &[[S; 2]],
    inv_sigma_px: f64,
) -> S {
    let mut keep = S::from(1.0);
    for &f in candidates {
        let [a, b, c] = faces[f as usize].map(|i| screen[i as usize]);
        let d2 = triangle_dist2(p, a, b, c);
        let prob = (d2 * -inv_sigma_px).exp();
        keep = keep * (S::from(1.0) - prob);
    }
    S::from(1.0) - keep
}

/// Z-buffered hard coverage plus candidate gathering for soft coverage.
///
/// `screen` and `height` are vertex values; the nearest face is the one with
/// the highest interpolated world height (the camera looks down).
pub fn visibility(
    screen: &[[f64; 2]],
    height: &[f64],
    faces: &[[u32; 3]],
    width: usize,
    raster_height: usize,
    settings: &RasterSettings,
) -> Coverage {
    let n = width * raster_height;
    let mut face_id = vec![NO_FACE; n];
    let mut bary = vec![[0.0; 3]; n];
    let mut depth = vec![0.0; n];
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut soft = vec![0.0; n];
    let ndc_per_px = 2.0 / width as f64;
    let inv_sigma_px = settings.inv_sigma * ndc_per_px * ndc_per_px;
    let box_px = settings.box_length / ndc_per_px;
    let box2 = box_px * box_px;

    let mut near: Vec<(u32, f64, u32)> = Vec::new();
    for (fi, f) in faces.iter().enumerate() {
        let [a, b, c] = f.map(|i| screen[i as usize]);
        let lo = |k: usize| (a[k].min(b[k]).min(c[k]) - box_px).floor().max(0.0);
        let hi = |k: usize, n: usize| (a[k].max(b[k]).max(c[k]) + box_px).ceil().min(n as f64);
        let (x0, x1) = (lo(0), hi(0, width));
        let (y0, y1) = (lo(1), hi(1, raster_height));
        if !(x0 < x1 && y0 < y1) {
            continue;
        }
        for y in y0 as usize..y1 as usize {
            for x in x0 as usize..x1 as usize {
                let p = [x as f64 + 0.5, y as f64 + 0.5];
                let pix = y * width + x;
                if let Some(w) = inside(p, a, b, c) {
                    let z = w[0] * height[f[0] as usize]
                        + w[1] * height[f[1] as usize]
                        + w[2] * height[f[2] as usize];
                    if z > best[pix] {
                        best[pix] = z;
                        face_id[pix] = fi as u32;
                        bary[pix] = w;
                        depth[pix] = z;
                    }
                } else {
                    let d2 = triangle_dist2(p, a, b, c);
                    if d2 <= box2 {
                        near.push((pix as u32, d2, fi as u32));
                    }
                }
            }
        }
    }

    near.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut boundary = Vec::new();
    let mut start = 0;
    while start < near.len() {
        let pix = near[start].0;
        let mut end = start;
        while end < near.len() && near[end].0 == pix {
            end += 1;
        }
        if face_id[pix as usize] == NO_FACE {
            let ranked: Vec<u32> = near[start..end]
                .iter()
                .take(settings.k)
                .map(|c| c.2)
                .collect();
            let p = pixel_center(pix as usize, width);
            soft[pix as usize] = soft_coverage(p, &ranked, faces, screen, inv_sigma_px);
            boundary.push((pix, ranked));
        }
        start = end;
    }
    for (s, &f) in soft.iter_mut().zip(&face_id) {
        if f != NO_FACE {
            *s = 1.0;
        }
    }

    Coverage {
        width,
        height: raster_height,
        face_id,
        bary,
        depth,
        soft,
        boundary,
        inv_sigma_px,
    }
}

/// Appearance inputs of one pixel's shading.
pub struct Shader<'a, S, A: ?Sized> {
    pub faces: &'a [[u32; 3]],
    pub screen: &'a [[S; 2]],
    pub height: &'a [S],
    pub normals: &'a [V3<S>],
    pub uv: &'a [[f64; 2]],
    pub albedo: &'a A,
    pub lobes: &'a [Lobe<S>],
    pub water: [S; 3],
}

/// Shaded value of a covered pixel.
#[derive(Clone, Copy, Debug)]
pub struct Shaded<S> {
    /// Grayscale albedo times radiance, clamped to `[0, 1]`.
    pub color: S,
    pub filtered: [S; 3],
    pub depth: S,
}

impl<S: Real, A: Albedo<S> + ?Sized> Shader<'_, S, A> {
    pub fn shade(&self, p: [f64; 2], face: u32) -> Shaded<S> {
        let f = self.faces[face as usize];
        let [a, b, c] = f.map(|i| self.screen[i as usize]);
        let w = barycentric(p, a, b, c).unwrap_or([S::from(1.0 / 3.0); 3]);
        let interp = |vals: [S; 3]| w[0] * vals[0] + w[1] * vals[1] + w[2] * vals[2];

        let uv = [0, 1].map(|k| interp(f.map(|i| S::from(self.uv[i as usize][k]))));
        let albedo = sample_bilinear(self.albedo, uv);

        let n = [0, 1, 2].map(|k| interp(f.map(|i| self.normals[i as usize][k])));
        let len = norm(n);
        let n = if len.value() > 0.0 {
            scale(n, S::from(1.0) / len)
        } else {
            n
        };
        let color = clamp01(albedo * radiance(self.lobes, n));

        let depth = interp(f.map(|i| self.height[i as usize]));
        let t = water_transmission(depth, self.water);
        Shaded {
            color,
            filtered: [color * t[0], color * t[1], color * t[2]],
            depth,
        }
    }
}

/// Fraction of `n x n` sub-samples of each pixel covered by any face.
pub fn supersampled_coverage(
    screen: &[[f64; 2]],
    faces: &[[u32; 3]],
    width: usize,
    height: usize,
    n: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for (pix, o) in out.iter_mut().enumerate() {
        let (x, y) = ((pix % width) as f64, (pix / width) as f64);
        let mut hits = 0;
        for sy in 0..n {
            for sx in 0..n {
                let p = [
                    x + (sx as f64 + 0.5) / n as f64,
                    y + (sy as f64 + 0.5) / n as f64,
                ];
                if faces.iter().any(|f| {
                    let [a, b, c] = f.map(|i| screen[i as usize]);
                    inside(p, a, b, c).is_some()
                }) {
                    hits += 1;
                }
            }
        }
        *o = hits as f64 / (n * n) as f64;
    }
    out
}
