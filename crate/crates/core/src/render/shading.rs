use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape, Var};
use crate::geom::{dot, norm, scale, V3};

/// Single-channel albedo texture, row-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Texture {
    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Texture {
            height,
            width,
            data: vec![value; height * width],
        }
    }
}

/// Source of texel values for shading: plain numbers or tape variables.
pub trait Albedo<S> {
    /// `(height, width)`.
    fn dims(&self) -> (usize, usize);
    fn texel(&self, index: usize) -> S;
}

impl Albedo<f64> for Texture {
    fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    fn texel(&self, index: usize) -> f64 {
        self.data[index]
    }
}

/// Texture whose texels become tape leaves the first time they are read.
pub struct TapedTexture<'a, 't> {
    texture: &'a Texture,
    tape: &'t Tape,
    leaves: RefCell<BTreeMap<usize, Var<'t>>>,
}

impl<'a, 't> TapedTexture<'a, 't> {
    pub fn new(texture: &'a Texture, tape: &'t Tape) -> Self {
        TapedTexture {
            texture,
            tape,
            leaves: RefCell::new(BTreeMap::new()),
        }
    }

    /// Texels read so far with their leaf variables, in index order.
    pub fn leaves(&self) -> Vec<(usize, Var<'t>)> {
        self.leaves.borrow().iter().map(|(&i, &v)| (i, v)).collect()
    }
}

impl<'t> Albedo<Var<'t>> for TapedTexture<'_, 't> {
    fn dims(&self) -> (usize, usize) {
        (self.texture.height, self.texture.width)
    }
    fn texel(&self, index: usize) -> Var<'t> {
        *self
            .leaves
            .borrow_mut()
            .entry(index)
            .or_insert_with(|| self.tape.var(self.texture.data[index]))
    }
}

/// Bilinear lookup with texel centers at `(i + 0.5) / W`, clamped at the
/// border. `u` runs along columns, `v` along rows.
pub fn sample_bilinear<S: Real, A: Albedo<S> + ?Sized>(texture: &A, uv: [S; 2]) -> S {
    let (h, w) = texture.dims();
    let axis = |t: S, n: usize| -> (usize, usize, S) {
        let x = t * n as f64 - 0.5;
        let xv = x.value();
        if xv <= 0.0 {
            (0, 0, S::zero())
        } else if xv >= (n - 1) as f64 {
            (n - 1, n - 1, S::zero())
        } else {
            let i = xv.floor() as usize;
            (i, i + 1, x - i as f64)
        }
    };
    let (c0, c1, fx) = axis(uv[0], w);
    let (r0, r1, fy) = axis(uv[1], h);
    let t00 = texture.texel(r0 * w + c0);
    let t01 = texture.texel(r0 * w + c1);
    let t10 = texture.texel(r1 * w + c0);
    let t11 = texture.texel(r1 * w + c1);
    let top = t00 + (t01 - t00) * fx;
    let bottom = t10 + (t11 - t10) * fx;
    top + (bottom - top) * fy
}

/// One spherical-Gaussian light lobe. The axis is normalized when used, so
/// it can be optimized as a free 3-vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lobe<S> {
    pub amplitude: S,
    pub axis: V3<S>,
    pub sharpness: S,
}

pub type SgLobe = Lobe<f64>;

/// `K` lobes with amplitude `1/K`, unit sharpness and axes on a Fibonacci
/// sphere.
pub fn default_lobes(k: usize) -> Vec<SgLobe> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64;
            Lobe {
                amplitude: 1.0 / k as f64,
                axis: [r * phi.cos(), y, r * phi.sin()],
                sharpness: 1.0,
            }
        })
        .collect()
}

/// Incoming radiance along unit normal `n`: `sum_j a_j exp(l_j (n . mu_j - 1))`.
pub fn radiance<S: Real>(lobes: &[Lobe<S>], n: V3<S>) -> S {
    let mut total = S::zero();
    for lobe in lobes {
        let mu = scale(lobe.axis, S::from(1.0) / norm(lobe.axis));
        total += lobe.amplitude * (lobe.sharpness * (dot(n, mu) - 1.0)).exp();
    }
    total
}

pub fn clamp01<S: Real>(x: S) -> S {
    let v = x.value();
    if v < 0.0 {
        S::zero()
    } else if v > 1.0 {
        S::from(1.0)
    } else {
        x
    }
}

/// Per-channel transmission `exp(min(d, 0) F)`.
pub fn water_transmission<S: Real>(depth: S, water: [S; 3]) -> [S; 3] {
    if depth.value() < 0.0 {
        water.map(|f| (depth * f).exp())
    } else {
        [S::from(1.0); 3]
    }
}

/// Applies the water filter to every pixel: `C exp(min(d, 0) F)`.
pub fn apply_water_filter(color: &[[f64; 3]], depth: &[f64], water: [f64; 3]) -> Vec<[f64; 3]> {
    color
        .iter()
        .zip(depth)
        .map(|(c, &d)| {
            let t = water_transmission(d, water);
            [c[0] * t[0], c[1] * t[1], c[2] * t[2]]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lobe(a: f64, axis: [f64; 3], l: f64) -> SgLobe {
        Lobe {
            amplitude: a,
            axis,
            sharpness: l,
        }
    }

    #[test]
    fn flat_lobe_is_constant_light() {
        let lobes = [lobe(1.0, [0.0, 1.0, 0.0], 1e-12)];
        for n in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.6, 0.8]] {
            assert!((radiance(&lobes, n) - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn aligned_normal_gives_amplitude() {
        let lobes = [lobe(0.37, [0.0, 2.0, 0.0], 5.0)];
        assert_eq!(radiance(&lobes, [0.0, 1.0, 0.0]), 0.37);
    }

    #[test]
    fn perpendicular_lobe_value() {
        let lobes = [lobe(1.0, [0.0, 1.0, 0.0], 2.0)];
        let c = 0.5 * radiance(&lobes, [1.0, 0.0, 0.0]);
        assert!((c - 0.067_667_641_6).abs() < 1e-10);
    }

    #[test]
    fn default_lobes_are_unit_and_normalized() {
        let lobes = default_lobes(9);
        assert_eq!(lobes.len(), 9);
        let total: f64 = lobes.iter().map(|l| l.amplitude).sum();
        assert!((total - 1.0).abs() < 1e-15);
        for l in &lobes {
            assert!((norm(l.axis) - 1.0).abs() < 1e-12);
            assert_eq!(l.sharpness, 1.0);
        }
    }

    #[test]
    fn water_filter_examples() {
        let c = vec![[1.0, 1.0, 1.0]; 2];
        assert_eq!(apply_water_filter(&c, &[-1.0, 0.3], [0.0; 3]), c);
        let out = apply_water_filter(&c, &[-1.0, 0.3], [0.5; 3]);
        for k in 0..3 {
            assert!((out[0][k] - 0.606_530_659_7).abs() < 1e-10);
        }
        assert_eq!(out[1], [1.0; 3]);
    }

    #[test]
    fn water_filter_is_monotone_in_depth() {
        let f = [0.2, 0.5, 0.9];
        let mut prev = [1.0; 3];
        for i in 1..50 {
            let t = water_transmission(-0.1 * i as f64, f);
            for k in 0..3 {
                assert!(t[k] <= prev[k]);
            }
            prev = t;
        }
    }

    #[test]
    fn bilinear_hits_texel_centers_and_interpolates() {
        let tex = Texture {
            height: 2,
            width: 2,
            data: vec![0.0, 1.0, 0.5, 0.25],
        };
        assert_eq!(sample_bilinear(&tex, [0.25, 0.25]), 0.0);
        assert_eq!(sample_bilinear(&tex, [0.75, 0.25]), 1.0);
        assert_eq!(sample_bilinear(&tex, [0.5, 0.25]), 0.5);
        assert_eq!(sample_bilinear(&tex, [0.0, 1.0]), 0.5);
        let mid = sample_bilinear(&tex, [0.5, 0.5]);
        assert!((mid - 0.4375).abs() < 1e-15);
    }

    #[test]
    fn taped_texture_creates_leaves_lazily() {
        let tex = Texture::constant(4, 4, 0.5);
        let tape = Tape::new();
        let taped = TapedTexture::new(&tex, &tape);
        let u = tape.var(0.4);
        let s = sample_bilinear(&taped, [u, Var::constant(0.4)]);
        assert_eq!(taped.leaves().len(), 4);
        let g = tape.gradient(&[s]).unwrap();
        let total: f64 = taped.leaves().iter().map(|&(_, v)| g.wrt(v)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
