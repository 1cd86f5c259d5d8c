//! End-to-end reconstruction: ingest, initialize, optimize, export.

mod config;
mod export;
mod fit;
mod init;
mod io;

pub use config::RunConfig;
pub use export::{export, loss_header, report_row, write_losses};
pub use fit::{
    finish, initial_params, render_params, run_reconstruction, sequence_cameras, Evaluation,
    LossRecord, Optimizer, Problem, ReconstructionResult, MIN_SHARPNESS,
};
pub use init::{initialize, Initialization};
pub use io::{
    frame_name, load_sequence, read_altitudes, read_mask, read_rgb, write_mask, write_rgb,
    CameraInfo, Observation, Observations,
};

use crate::autodiff::DiffError;
use crate::body::BodyError;
use crate::morpho::MorphoError;
use crate::objectives::ObjectiveError;
use crate::render::RenderError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("input: {0}")]
    Input(String),
    #[error("every mask is empty")]
    EmptyMasks,
    #[error("epoch {epoch}: loss term {term} is not finite")]
    NonFinite { epoch: usize, term: &'static str },
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Morpho(#[from] MorphoError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}
