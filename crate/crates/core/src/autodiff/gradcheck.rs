//! Central finite-difference verification of analytic gradients.

use super::DiffError;

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug)]
pub struct FdReport {
    /// Worst relative error over the compared entries.
    pub max_rel_error: f64,
    /// Index of the worst entry, if any entry was compared.
    pub worst: Option<usize>,
    /// Numeric derivative per entry.
    pub numeric: Vec<f64>,
    /// Number of entries that entered the comparison.
    pub compared: usize,
}

/// Entries whose analytic and numeric derivatives are both below this
/// magnitude are skipped.
pub const GRAD_FLOOR: f64 = 1e-8;

/// Compares `analytic` against `(f(x+eps) - f(x-eps)) / 2 eps` entrywise.
///
/// The relative error of an entry is `|a - n| / max(|a|, |n|)`.
pub fn finite_diff_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<FdReport, DiffError>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(DiffError::DegenerateStep(eps));
    }
    if params.len() != analytic.len() {
        return Err(DiffError::ShapeMismatch {
            params: params.len(),
            grads: analytic.len(),
            state: params.len(),
        });
    }
    let mut x = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    let mut max_rel_error = 0.0;
    let mut worst = None;
    let mut compared = 0;
    for i in 0..params.len() {
        let x0 = x[i];
        x[i] = x0 + eps;
        let fp = loss(&x);
        x[i] = x0 - eps;
        let fm = loss(&x);
        x[i] = x0;
        let n = (fp - fm) / (2.0 * eps);
        numeric.push(n);
        let a = analytic[i];
        let scale = a.abs().max(n.abs());
        if scale <= GRAD_FLOOR {
            continue;
        }
        compared += 1;
        let rel = (a - n).abs() / scale;
        if rel > max_rel_error || worst.is_none() {
            max_rel_error = rel.max(max_rel_error);
            worst = Some(i);
        }
    }
    Ok(FdReport {
        max_rel_error,
        worst,
        numeric,
        compared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1] * x[1] + x[2];
        let x = [0.7, -1.3, 2.0];
        let g = [6.0 * 0.7 - 1.3, 0.7 + 4.0 * 1.3, 1.0];
        let r = finite_diff_check(f, &x, &g, 1e-4).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.compared, 3);
    }

    #[test]
    fn zero_step_is_degenerate() {
        let r = finite_diff_check(|x: &[f64]| x[0], &[1.0], &[1.0], 0.0);
        assert!(matches!(r, Err(DiffError::DegenerateStep(_))));
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let r = finite_diff_check(|x: &[f64]| x[0].sin(), &[0.4], &[1.0], 1e-5).unwrap();
        assert!(r.max_rel_error > 0.05);
        assert_eq!(r.worst, Some(0));
    }
}
