use std::f64::consts::FRAC_PI_4;
use std::io::Read;

use super::MorphoError;

/// Measurement sites at 5%, 10%, ..., 95% of body length.
pub const SITES: usize = 19;

pub type SiteValues = [Option<f64>; SITES];

/// Widths (and optionally heights) measured along the body.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyProfile {
    pub id: Option<String>,
    /// Body length in meters.
    pub bl: f64,
    pub widths: SiteValues,
    /// Measured heights; missing sites are predicted from the width.
    pub heights: SiteValues,
}

/// Volume of one elliptical frustum with linearly interpolated width and
/// height: `0.05 BL pi/4 [W_A H_A + (W_A dH + H_A dW)/2 + dW dH/3]`.
pub fn elliptical_segment_volume(bl: f64, wa: f64, wp: f64, ha: f64, hp: f64) -> f64 {
    let (dw, dh) = (wp - wa, hp - ha);
    0.05 * bl * FRAC_PI_4 * (wa * ha + (wa * dh + ha * dw) / 2.0 + dw * dh / 3.0)
}

/// The segment formula exactly as printed, where the height factor does not
/// vary along the segment: `0.05 BL pi/4 (W_A + W_P)/2 H_P`.
pub fn elliptical_segment_volume_strict(bl: f64, wa: f64, wp: f64, _ha: f64, hp: f64) -> f64 {
    0.05 * bl * FRAC_PI_4 * (wa + wp) / 2.0 * hp
}

/// Sum of the 20 segment volumes. Endpoints are closed, the 90% and 95% sites
/// are replaced by interpolation between 85% and the tail tip, and heights
/// missing from the profile come from `width * hw_ratio`.
pub fn elliptical_body_volume(
    profile: &BodyProfile,
    hw_ratios: &[f64; SITES],
    strict: bool,
) -> Result<f64, MorphoError> {
    if !(profile.bl > 0.0 && profile.bl.is_finite()) {
        return Err(MorphoError::NonPositiveLength(profile.bl));
    }
    // Index 0 is the rostrum tip, 20 the tail tip.
    let mut w = [0.0; SITES + 2];
    let mut h = [0.0; SITES + 2];
    for s in 0..17 {
        let width = profile.widths[s].ok_or(MorphoError::MissingWidth(5 * (s + 1)))?;
        if !(width >= 0.0) {
            return Err(MorphoError::Negative("width"));
        }
        let height = profile.heights[s].unwrap_or(width * hw_ratios[s]);
        if !(height >= 0.0) {
            return Err(MorphoError::Negative("height"));
        }
        w[s + 1] = width;
        h[s + 1] = height;
    }
    for (site, frac) in [(18, 2.0 / 3.0), (19, 1.0 / 3.0)] {
        w[site] = w[17] * frac;
        h[site] = h[17] * frac;
    }
    let segment = if strict {
        elliptical_segment_volume_strict
    } else {
        elliptical_segment_volume
    };
    Ok((0..20)
        .map(|s| segment(profile.bl, w[s], w[s + 1], h[s], h[s + 1]))
        .sum())
}

fn site_label(prefix: char, s: usize) -> String {
    format!("{prefix}{:02}", 5 * (s + 1))
}

fn parse_cell(text: &str, what: &str) -> Result<Option<f64>, MorphoError> {
    let t = text.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| MorphoError::Csv(format!("{what}: cannot parse `{t}`")))
}

/// Reads profiles from CSV with a `BL` column, width columns `W05`..`W95`,
/// and optional `H05`..`H95` and `id` columns. Empty cells are missing
/// values.
pub fn read_profiles<R: Read>(source: R) -> Result<Vec<BodyProfile>, MorphoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let bl_col = col("BL").ok_or_else(|| MorphoError::Csv("missing BL column".into()))?;
    let id_col = col("id");
    let w_cols: Vec<Option<usize>> = (0..SITES).map(|s| col(&site_label('W', s))).collect();
    let h_cols: Vec<Option<usize>> = (0..SITES).map(|s| col(&site_label('H', s))).collect();
    if w_cols.iter().all(Option::is_none) {
        return Err(MorphoError::Csv("no width columns W05..W95".into()));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let bl = parse_cell(&record[bl_col], "BL")?
            .ok_or_else(|| MorphoError::Csv("empty BL".into()))?;
        let read = |cols: &[Option<usize>]| -> Result<SiteValues, MorphoError> {
            let mut v = [None; SITES];
            for (s, c) in cols.iter().enumerate() {
                if let Some(c) = *c {
                    v[s] = parse_cell(record.get(c).unwrap_or(""), &headers[c])?;
                }
            }
            Ok(v)
        };
        out.push(BodyProfile {
            id: id_col.map(|c| record[c].to_string()),
            bl,
            widths: read(&w_cols)?,
            heights: read(&h_cols)?,
        });
    }
    Ok(out)
}

/// Reads 19 height-to-width ratios, one per site in order. Any layout works
/// (one row, one column, with or without a header) as long as exactly 19
/// numeric cells are present.
pub fn read_hw_ratios<R: Read>(source: R) -> Result<[f64; SITES], MorphoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut values = Vec::new();
    for record in reader.records() {
        for cell in record?.iter() {
            if let Ok(v) = cell.parse::<f64>() {
                values.push(v);
            }
        }
    }
    let ratios: [f64; SITES] =
        values
            .as_slice()
            .try_into()
            .map_err(|_| MorphoError::Dimension {
                what: "HW ratios",
                expected: SITES,
                got: values.len(),
            })?;
    if ratios.iter().any(|r| !(*r >= 0.0)) {
        return Err(MorphoError::Negative("HW ratio"));
    }
    Ok(ratios)
}
