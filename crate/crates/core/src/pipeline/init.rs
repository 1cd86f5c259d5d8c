//! Starting point of the fit: positions from mask centroids and headings
//! from mask principal axes.

use std::f64::consts::PI;

use crate::objectives::direction_informative;
use crate::render::{
    init_position_from_mask, interpolate_missing, largest_component, principal_axis, yaw_toward,
    Camera, RenderError,
};

use super::{Observations, PipelineError};

#[derive(Clone, Debug, PartialEq)]
pub struct Initialization {
    pub position: Vec<[f64; 3]>,
    /// Heading about +y per frame, unwrapped to be continuous.
    pub yaw: Vec<f64>,
    pub centroids: Vec<Option<[f64; 2]>>,
    /// Whether the masks move enough to tell the direction of travel.
    pub moving: bool,
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `observations` must already be at the cameras' raster.
pub fn initialize(
    observations: &Observations,
    cameras: &[Camera],
    moving_px: f64,
) -> Result<Initialization, PipelineError> {
    let t_count = observations.frames.len();
    let mut positions = Vec::with_capacity(t_count);
    let mut axes = Vec::with_capacity(t_count);
    let mut centroids = Vec::with_capacity(t_count);
    for (f, cam) in observations.frames.iter().zip(cameras) {
        // Speckle from the segmenter would drag the centroid and the axis.
        let mask = largest_component(&f.mask, observations.width);
        match init_position_from_mask(&mask, cam) {
            Ok(p) => positions.push(Some(p)),
            Err(RenderError::EmptyMask) => positions.push(None),
            Err(e) => return Err(e.into()),
        }
        let axis = principal_axis(&mask, observations.width);
        centroids.push(axis.map(|a| a.centroid));
        axes.push(axis);
    }
    let position = interpolate_missing(&positions).map_err(|_| PipelineError::EmptyMasks)?;
    let moving = direction_informative(&centroids, moving_px);

    // Image columns follow +x and rows +z, so pixel directions and world
    // ground-plane directions agree.
    let window = 2;
    let mut dirs: Vec<Option<[f64; 2]>> = vec![None; t_count];
    let mut prev: Option<[f64; 2]> = None;
    for t in 0..t_count {
        let Some(ax) = axes[t] else { continue };
        let mut a = ax.axis;
        let motion = {
            let (lo, hi) = (t.saturating_sub(window), (t + window).min(t_count - 1));
            [
                position[hi][0] - position[lo][0],
                position[hi][2] - position[lo][2],
            ]
        };
        let speed = dot2(motion, motion).sqrt();
        let flip = if moving && speed > 1e-9 && dot2(a, motion).abs() > 0.2 * speed {
            dot2(a, motion) < 0.0
        } else if let Some(p) = prev {
            dot2(a, p) < 0.0
        } else {
            ax.front_bias < 0.0
        };
        if flip {
            a = [-a[0], -a[1]];
        }
        dirs[t] = Some(a);
        prev = Some(a);
    }

    let mut raw: Vec<Option<f64>> = dirs.iter().map(|d| d.map(yaw_toward)).collect();
    // Frames without a mask borrow the nearest earlier heading, or the first one.
    let first = raw.iter().flatten().next().copied().unwrap_or(0.0);
    let mut last = first;
    for y in &mut raw {
        match y {
            Some(v) => last = *v,
            None => *y = Some(last),
        }
    }
    let mut yaw: Vec<f64> = raw.into_iter().map(|y| y.unwrap()).collect();
    for t in 1..t_count {
        while yaw[t] - yaw[t - 1] > PI {
            yaw[t] -= 2.0 * PI;
        }
        while yaw[t] - yaw[t - 1] < -PI {
            yaw[t] += 2.0 * PI;
        }
    }
    Ok(Initialization {
        position,
        yaw,
        centroids,
        moving,
    })
}
