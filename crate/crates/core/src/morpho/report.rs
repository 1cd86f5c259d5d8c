use std::io::Write;

use serde::Serialize;

use super::MorphoError;

pub const REPORT_HEADER: [&str; 7] = [
    "id",
    "volume_3d",
    "volume_elliptical",
    "bci",
    "density",
    "mass_3d",
    "mass_elliptical",
];

/// One morphometrics row. Condition and density are derived from the 3D
/// volume; elliptical columns stay empty without a width profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub id: String,
    pub volume_3d: Option<f64>,
    pub volume_elliptical: Option<f64>,
    pub bci: Option<f64>,
    pub density: Option<f64>,
    pub mass_3d: Option<f64>,
    pub mass_elliptical: Option<f64>,
}

pub fn write_report<W: Write>(sink: W, rows: &[ReportRow]) -> Result<(), MorphoError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(sink);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| MorphoError::Io(e.to_string()))
}
