use serde::{Deserialize, Serialize};

use super::MorphoError;

/// Volume-length allometry and the density-versus-condition line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassModel {
    pub a0: f64,
    pub a1: f64,
    /// kg/m^3
    pub alpha: f64,
    /// kg/m^3 per unit BCI
    pub beta_d: f64,
}

impl Default for MassModel {
    fn default() -> Self {
        MassModel {
            a0: -4.0206,
            a1: 2.5929,
            alpha: 1000.71,
            beta_d: 278.12,
        }
    }
}

fn check_length(bl: f64) -> Result<(), MorphoError> {
    if bl > 0.0 && bl.is_finite() {
        Ok(())
    } else {
        Err(MorphoError::NonPositiveLength(bl))
    }
}

/// Expected volume `exp(a0 + a1 ln BL)` for a body of length `bl` meters.
pub fn expected_volume(bl: f64, model: &MassModel) -> Result<f64, MorphoError> {
    check_length(bl)?;
    Ok((model.a0 + model.a1 * bl.ln()).exp())
}

/// Relative excess of the observed volume over the expected one.
pub fn body_condition_index(volume: f64, bl: f64, model: &MassModel) -> Result<f64, MorphoError> {
    if !(volume >= 0.0) {
        return Err(MorphoError::Negative("volume"));
    }
    let expected = expected_volume(bl, model)?;
    Ok((volume - expected) / expected)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassEstimate {
    pub bci: f64,
    /// kg/m^3
    pub density: f64,
    /// kg
    pub mass: f64,
    /// Set when the density line gives a non-positive density; the mass is
    /// then meaningless.
    pub out_of_model: bool,
}

/// Mass `BV (alpha - beta_d BCI)`.
pub fn predicted_mass(
    volume: f64,
    bl: f64,
    model: &MassModel,
) -> Result<MassEstimate, MorphoError> {
    let bci = body_condition_index(volume, bl, model)?;
    let density = model.alpha - model.beta_d * bci;
    Ok(MassEstimate {
        bci,
        density,
        mass: volume * density,
        out_of_model: density <= 0.0,
    })
}
