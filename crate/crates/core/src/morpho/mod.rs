//! Body volume, the elliptical-segment baseline, body condition and mass.

mod elliptical;
mod mass;
mod report;
mod volume;

pub use elliptical::{
    elliptical_body_volume, elliptical_segment_volume, elliptical_segment_volume_strict,
    read_hw_ratios, read_profiles, BodyProfile, SiteValues, SITES,
};
pub use mass::{body_condition_index, expected_volume, predicted_mass, MassEstimate, MassModel};
pub use report::{write_report, ReportRow, REPORT_HEADER};
pub use volume::{icosphere, mesh_volume, unit_cube, voxel_volume};

use crate::body::BodyError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MorphoError {
    #[error("mesh is not a closed surface: {0}")]
    OpenMesh(BodyError),
    #[error("body length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("{0} must be nonnegative")]
    Negative(&'static str),
    #[error("missing width at {0}% of body length")]
    MissingWidth(usize),
    #[error("{what}: expected {expected} values, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("{0}")]
    Io(String),
}

impl From<csv::Error> for MorphoError {
    fn from(e: csv::Error) -> Self {
        MorphoError::Csv(e.to_string())
    }
}
