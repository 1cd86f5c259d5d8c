//! Model-based reconstruction of dolphins from nadir drone video.
//!
//! An articulated, part-scalable template is posed per frame, projected
//! through a metric nadir camera, softly rasterized, shaded and filtered for
//! water, and fitted to the observed frames and masks with Adam. Volume,
//! body condition and mass are derived from the fitted mesh.

pub mod autodiff;
pub mod body;
pub mod geom;
pub mod morpho;
pub mod objectives;
pub mod pipeline;
pub mod render;
pub mod scene;
pub mod synth;
