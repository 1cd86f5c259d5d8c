//! Initial placement of the body from observed masks.

use super::{Camera, RenderError};

/// Mean pixel-center position of the mask (values >= 0.5 count).
pub fn mask_centroid(mask: &[f64], width: usize) -> Option<[f64; 2]> {
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
    for (i, &m) in mask.iter().enumerate() {
        if m >= 0.5 {
            su += (i % width) as f64 + 0.5;
            sv += (i / width) as f64 + 0.5;
            n += 1;
        }
    }
    (n > 0).then(|| [su / n as f64, sv / n as f64])
}

/// Back-projects the mask centroid onto the water plane. The mask must have
/// the camera's resolution.
pub fn init_position_from_mask(mask: &[f64], camera: &Camera) -> Result<[f64; 3], RenderError> {
    if mask.len() != camera.width * camera.height {
        return Err(RenderError::Dimension {
            what: "mask",
            expected: camera.width * camera.height,
            got: mask.len(),
        });
    }
    let c = mask_centroid(mask, camera.width).ok_or(RenderError::EmptyMask)?;
    Ok(camera.unproject(c, 0.0))
}

/// Fills frames without a position by linear interpolation between the
/// nearest valid neighbors (or copies the nearest one at the ends).
pub fn interpolate_missing(positions: &[Option<[f64; 3]>]) -> Result<Vec<[f64; 3]>, RenderError> {
    let valid: Vec<usize> = (0..positions.len())
        .filter(|&i| positions[i].is_some())
        .collect();
    if valid.is_empty() {
        return Err(RenderError::EmptyMask);
    }
    Ok((0..positions.len())
        .map(|t| {
            if let Some(p) = positions[t] {
                return p;
            }
            let next = valid.iter().copied().find(|&i| i > t);
            let prev = valid.iter().copied().rev().find(|&i| i < t);
            match (prev, next) {
                (Some(a), Some(b)) => {
                    let (pa, pb) = (positions[a].unwrap(), positions[b].unwrap());
                    let s = (t - a) as f64 / (b - a) as f64;
                    [0, 1, 2].map(|k| pa[k] + (pb[k] - pa[k]) * s)
                }
                (Some(a), None) => positions[a].unwrap(),
                (None, Some(b)) => positions[b].unwrap(),
                (None, None) => unreachable!(),
            }
        })
        .collect())
}

/// Long axis of a mask from its second moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskAxis {
    pub centroid: [f64; 2],
    /// Unit direction of the long axis in pixel coordinates; sign arbitrary.
    pub axis: [f64; 2],
    /// Centroid minus the midpoint of the mask's extent along `axis`. Bodies
    /// carry their bulk forward, so the sign hints at the front.
    pub front_bias: f64,
}

pub fn principal_axis(mask: &[f64], width: usize) -> Option<MaskAxis> {
    let centroid = mask_centroid(mask, width)?;
    let (mut suu, mut suv, mut svv) = (0.0, 0.0, 0.0);
    let pixels: Vec<[f64; 2]> = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m >= 0.5)
        .map(|(i, _)| {
            [
                (i % width) as f64 + 0.5 - centroid[0],
                (i / width) as f64 + 0.5 - centroid[1],
            ]
        })
        .collect();
    for p in &pixels {
        suu += p[0] * p[0];
        suv += p[0] * p[1];
        svv += p[1] * p[1];
    }
    // Major eigenvector of [[suu, suv], [suv, svv]].
    let angle = 0.5 * (2.0 * suv).atan2(suu - svv);
    let axis = [angle.cos(), angle.sin()];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &pixels {
        let s = p[0] * axis[0] + p[1] * axis[1];
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Some(MaskAxis {
        centroid,
        axis,
        front_bias: -(lo + hi) / 2.0,
    })
}

/// Heading angle about +y that turns model forward (+z) toward the image
/// direction `dir` (columns follow +x, rows +z).
pub fn yaw_toward(dir: [f64; 2]) -> f64 {
    dir[0].atan2(dir[1])
}

/// Keeps only the largest 4-connected foreground region. Ties go to the
/// region found first in row-major order.
pub fn largest_component(mask: &[f64], width: usize) -> Vec<f64> {
    let n = mask.len();
    let height = if width == 0 { 0 } else { n / width };
    let mut label = vec![0u32; n];
    let (mut best, mut best_size, mut next) = (0u32, 0usize, 0u32);
    let mut stack = Vec::new();
    for seed in 0..n {
        if mask[seed] < 0.5 || label[seed] != 0 {
            continue;
        }
        next += 1;
        label[seed] = next;
        stack.push(seed);
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if mask[q] >= 0.5 && label[q] == 0 {
                    label[q] = next;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        if size > best_size {
            best_size = size;
            best = next;
        }
    }
    label
        .iter()
        .map(|&l| f64::from(l != 0 && l == best))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::camera_from_drone;

    fn disc(width: usize, height: usize, c: [f64; 2], r: f64) -> Vec<f64> {
        (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64 + 0.5, (i / width) as f64 + 0.5);
                f64::from(((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt() <= r)
            })
            .collect()
    }

    #[test]
    fn centered_mask_maps_to_origin() {
        let cam = camera_from_drone(17.27, 12.29, 15.0, (60, 80)).unwrap();
        let m = disc(80, 60, [40.0, 30.0], 6.0);
        let p = init_position_from_mask(&m, &cam).unwrap();
        assert!(p.iter().all(|c| c.abs() < 1e-12), "{p:?}");
    }

    #[test]
    fn offset_maps_through_inverse_pinhole() {
        let cam = camera_from_drone(17.27, 12.29, 15.0, (60, 80)).unwrap();
        let m = disc(80, 60, [50.0, 30.0], 6.0);
        let p = init_position_from_mask(&m, &cam).unwrap();
        let expect = 10.0 * 2.0 * 15.0 * (cam.fov / 2.0).tan() / 80.0;
        assert!((p[0] - expect).abs() < 1e-9 && p[1] == 0.0 && p[2].abs() < 1e-9);
    }

    #[test]
    fn empty_mask_is_flagged() {
        let cam = camera_from_drone(17.27, 12.29, 15.0, (6, 8)).unwrap();
        assert!(matches!(
            init_position_from_mask(&[0.0; 48], &cam),
            Err(RenderError::EmptyMask)
        ));
    }

    #[test]
    fn gap_is_interpolated() {
        let filled =
            interpolate_missing(&[Some([0.0, 0.0, 0.0]), None, Some([2.0, 0.0, -4.0]), None])
                .unwrap();
        assert_eq!(filled[1], [1.0, 0.0, -2.0]);
        assert_eq!(filled[3], [2.0, 0.0, -4.0]);
        assert!(interpolate_missing(&[None, None]).is_err());
    }

    #[test]
    fn axis_of_an_elongated_blob() {
        let (w, h) = (60, 60);
        let m: Vec<f64> = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64 + 0.5 - 30.0, (i / w) as f64 + 0.5 - 30.0);
                // Long along the diagonal.
                let (a, b) = ((x + y) / 2f64.sqrt(), (x - y) / 2f64.sqrt());
                f64::from((a / 20.0).powi(2) + (b / 5.0).powi(2) <= 1.0)
            })
            .collect();
        let ax = principal_axis(&m, w).unwrap();
        let dot = (ax.axis[0] + ax.axis[1]).abs() / 2f64.sqrt();
        assert!(dot > 0.999, "{:?}", ax.axis);
    }

    #[test]
    fn yaw_of_forward_image_direction() {
        assert_eq!(yaw_toward([0.0, 1.0]), 0.0);
        assert!((yaw_toward([1.0, 0.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn speckle_is_dropped() {
        #[rustfmt::skip]
        let mask = [
            1.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 1.0, 0.0,
            0.0, 0.0, 1.0, 1.0, 1.0,
            0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0, 1.0,
        ];
        let kept = largest_component(&mask, 5);
        let on: Vec<usize> = (0..25).filter(|&i| kept[i] == 1.0).collect();
        assert_eq!(on, vec![7, 8, 12, 13, 14]);
        assert!(largest_component(&[0.0; 6], 3).iter().all(|&x| x == 0.0));
    }
}
