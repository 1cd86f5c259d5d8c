//! Loss terms, their weighting, and the vertical-drift heuristic.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::autodiff::{sum, Real};
use crate::body::rotated_forward;
use crate::geom::{dot, norm, sub, V3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("{what}: expected {expected} values, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("loss term {0} is not finite")]
    NonFinite(&'static str),
}

/// Names the individual loss terms, in log order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Rgb,
    Mask,
    Pose,
    Scale,
    ScaleAxes,
    ScaleSmooth,
    SmoothPos,
    SmoothRot,
    SmoothPose,
    Direction,
}

pub const TERM_COUNT: usize = 10;

impl Term {
    pub const ALL: [Term; TERM_COUNT] = [
        Term::Rgb,
        Term::Mask,
        Term::Pose,
        Term::Scale,
        Term::ScaleAxes,
        Term::ScaleSmooth,
        Term::SmoothPos,
        Term::SmoothRot,
        Term::SmoothPose,
        Term::Direction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Rgb => "rgb",
            Term::Mask => "mask",
            Term::Pose => "pose",
            Term::Scale => "scale",
            Term::ScaleAxes => "scale_axes",
            Term::ScaleSmooth => "scale_smooth",
            Term::SmoothPos => "smooth_pos",
            Term::SmoothRot => "smooth_rot",
            Term::SmoothPose => "smooth_pose",
            Term::Direction => "direction",
        }
    }
}

/// Weight of each loss term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub rgb: f64,
    pub mask: f64,
    pub pose: f64,
    pub scale: f64,
    pub scale_axes: f64,
    pub scale_smooth: f64,
    pub smooth_pos: f64,
    pub smooth_rot: f64,
    pub smooth_pose: f64,
    pub direction: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rgb: 1.0,
            mask: 1.0,
            pose: 2.0,
            scale: 0.001,
            scale_axes: 0.1,
            scale_smooth: 5.0,
            smooth_pos: 500.0,
            smooth_rot: 500.0,
            smooth_pose: 500.0,
            direction: 0.1,
        }
    }
}

impl LossWeights {
    pub fn weight(&self, term: Term) -> f64 {
        match term {
            Term::Rgb => self.rgb,
            Term::Mask => self.mask,
            Term::Pose => self.pose,
            Term::Scale => self.scale,
            Term::ScaleAxes => self.scale_axes,
            Term::ScaleSmooth => self.scale_smooth,
            Term::SmoothPos => self.smooth_pos,
            Term::SmoothRot => self.smooth_rot,
            Term::SmoothPose => self.smooth_pose,
            Term::Direction => self.direction,
        }
    }

    /// First negative or non-finite weight, if any.
    pub fn invalid(&self) -> Option<Term> {
        Term::ALL
            .into_iter()
            .find(|&t| !(self.weight(t) >= 0.0 && self.weight(t).is_finite()))
    }
}

/// Raw value of every term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms<S> {
    pub values: [S; TERM_COUNT],
}

impl<S: Real> LossTerms<S> {
    pub fn zero() -> Self {
        LossTerms {
            values: [S::zero(); TERM_COUNT],
        }
    }

    pub fn values(&self) -> LossTerms<f64> {
        LossTerms {
            values: self.values.map(|v| v.value()),
        }
    }
}

impl<S> Index<Term> for LossTerms<S> {
    type Output = S;
    fn index(&self, t: Term) -> &S {
        &self.values[t as usize]
    }
}

impl<S> IndexMut<Term> for LossTerms<S> {
    fn index_mut(&mut self, t: Term) -> &mut S {
        &mut self.values[t as usize]
    }
}

impl LossTerms<f64> {
    pub fn weighted(&self, weights: &LossWeights) -> [f64; TERM_COUNT] {
        Term::ALL.map(|t| self[t] * weights.weight(t))
    }

    /// Termwise sum.
    pub fn accumulate(&mut self, other: &LossTerms<f64>) {
        for (a, b) in self.values.iter_mut().zip(other.values) {
            *a += b;
        }
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ObjectiveError> {
    if expected == got {
        Ok(())
    } else {
        Err(ObjectiveError::Dimension {
            what,
            expected,
            got,
        })
    }
}

/// Squared color error over the pixels the render covers.
pub fn loss_rgb<S: Real>(
    rendered: &[[S; 3]],
    observed: &[[f64; 3]],
    coverage: &[f64],
) -> Result<S, ObjectiveError> {
    check_len("observed image", rendered.len(), observed.len())?;
    check_len("coverage", rendered.len(), coverage.len())?;
    let mut total = S::zero();
    for ((c, i), &b) in rendered.iter().zip(observed).zip(coverage) {
        if b == 0.0 {
            continue;
        }
        for k in 0..3 {
            total += ((c[k] - i[k]) * b).square();
        }
    }
    Ok(total)
}

/// Soft IoU loss `1 - sum(a b) / sum(a + b - a b)`; zero when both masks are
/// empty.
pub fn loss_mask_iou<S: Real>(soft: &[S], observed: &[f64]) -> Result<S, ObjectiveError> {
    check_len("observed mask", soft.len(), observed.len())?;
    let mut inter = S::zero();
    let mut union = S::zero();
    for (&a, &b) in soft.iter().zip(observed) {
        if a.value() == 0.0 && b == 0.0 {
            continue;
        }
        let ab = a * b;
        inter += ab;
        union += a + b - ab;
    }
    if union.value() == 0.0 {
        return Ok(S::zero());
    }
    Ok(S::from(1.0) - inter / union)
}

/// Squared norm of all joint rotations; row 0 (global orientation) of every
/// frame is left out.
pub fn loss_pose<S: Real>(theta: &[Vec<V3<S>>]) -> S {
    sum(theta
        .iter()
        .flat_map(|f| f.iter().skip(1))
        .flat_map(|r| r.iter().map(|&x| x.square())))
}

/// Squared Frobenius norm of the scale coefficients.
pub fn loss_scale<S: Real>(beta: &[[S; 4]]) -> S {
    sum(beta.iter().flatten().map(|&x| x.square()))
}

/// Gaps between the x, y and z coefficients of each group.
pub fn loss_scale_axes<S: Real>(beta: &[[S; 4]]) -> S {
    sum(beta
        .iter()
        .map(|b| (b[1] - b[2]).square() + (b[2] - b[3]).square()))
}

/// Squared difference of each group's coefficients to its parent group's.
pub fn loss_scale_smooth<S: Real>(
    beta: &[[S; 4]],
    group_parents: &[Option<usize>],
) -> Result<S, ObjectiveError> {
    check_len("beta rows", group_parents.len(), beta.len())?;
    let mut total = S::zero();
    for (k, parent) in group_parents.iter().enumerate() {
        let Some(p) = *parent else { continue };
        for c in 0..4 {
            total += (beta[k][c] - beta[p][c]).square();
        }
    }
    Ok(total)
}

/// Squared change between adjacent frames, summed over entries and averaged
/// over the `T - 1` gaps. Zero for fewer than two frames.
pub fn loss_smooth_temporal<S: Real>(series: &[Vec<S>]) -> Result<S, ObjectiveError> {
    if series.len() < 2 {
        return Ok(S::zero());
    }
    let mut total = S::zero();
    for pair in series.windows(2) {
        check_len("series entries", pair[0].len(), pair[1].len())?;
        for (&a, &b) in pair[0].iter().zip(&pair[1]) {
            total += (b - a).square();
        }
    }
    Ok(total / (series.len() - 1) as f64)
}

/// Displacements shorter than this (meters) carry no direction.
pub const MIN_MOTION: f64 = 1e-6;

/// Cosine distance between each frame's rotated forward vector and its
/// direction of travel, summed over frames that move.
pub fn loss_direction<S: Real>(global: &[V3<S>], positions: &[V3<S>]) -> Result<S, ObjectiveError> {
    check_len("positions", global.len(), positions.len())?;
    let mut total = S::zero();
    for t in 1..positions.len() {
        let d = sub(positions[t], positions[t - 1]);
        let len = norm(d);
        if len.value() < MIN_MOTION {
            continue;
        }
        let fwd = rotated_forward(global[t]);
        total += S::from(1.0) - dot(fwd, d) / len;
    }
    Ok(total)
}

/// Vertical speeds and the level band of the drift heuristic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftRates {
    pub v_surf: f64,
    pub v_dive: f64,
    pub frame_rate: f64,
    pub level_threshold: f64,
}

impl Default for DriftRates {
    fn default() -> Self {
        DriftRates {
            v_surf: 6.6,
            v_dive: 2.2,
            frame_rate: 50.0,
            level_threshold: 1e-3,
        }
    }
}

/// Height change over one frame for a body with global orientation `global`.
pub fn vertical_drift(global: [f64; 3], rates: &DriftRates) -> f64 {
    let up = rotated_forward(global)[1];
    if up > rates.level_threshold {
        rates.v_surf / rates.frame_rate
    } else if up < -rates.level_threshold {
        -rates.v_dive / rates.frame_rate
    } else {
        0.0
    }
}

/// Accumulated drift per frame: frame 0 stays put and every later frame
/// adds the drift of its own orientation.
pub fn drift_offsets(global: &[[f64; 3]], rates: &DriftRates) -> Vec<f64> {
    let mut out = Vec::with_capacity(global.len());
    let mut acc = 0.0;
    for (t, g) in global.iter().enumerate() {
        if t > 0 {
            acc += vertical_drift(*g, rates);
        }
        out.push(acc);
    }
    out
}

/// Whether the subject moves far enough across the image for the direction
/// term to mean anything: some centroid lies at least `threshold_px` from
/// the first one.
pub fn direction_informative(centroids: &[Option<[f64; 2]>], threshold_px: f64) -> bool {
    let mut valid = centroids.iter().flatten();
    let Some(first) = valid.next() else {
        return false;
    };
    valid.any(|c| ((c[0] - first[0]).powi(2) + (c[1] - first[1]).powi(2)).sqrt() >= threshold_px)
}

/// Weighted sum of the terms. Fails on the first non-finite raw term.
pub fn total_loss<S: Real>(
    terms: &LossTerms<S>,
    weights: &LossWeights,
) -> Result<S, ObjectiveError> {
    let mut total = S::zero();
    for t in Term::ALL {
        let v = terms[t];
        if !v.value().is_finite() {
            return Err(ObjectiveError::NonFinite(t.name()));
        }
        let w = weights.weight(t);
        if w != 0.0 {
            total += v * w;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
