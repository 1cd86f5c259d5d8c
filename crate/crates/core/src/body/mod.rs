//! Articulated, part-scalable dolphin template.
//!
//! A body is produced in three stages: per-part shape deformation
//! ([`deform_shape`]), rigid reconnection of the parts along the kinematic
//! tree ([`reconnect_parts`]) and linear blend skinning plus the global
//! transform ([`pose_mesh`]).

mod obj;
mod pose;
pub mod procedural;
mod shape;
mod template;

pub use obj::{parse_obj, write_obj, ObjMesh};
pub use pose::{
    joint_rotations, mirror_rotation, pose_mesh, rodrigues, rotated_forward, SMALL_ANGLE,
};
pub use shape::{deform_shape, reconnect_parts, shaped_body, Connected};
pub use template::{
    check_closed, load_template, rest_length, GroupSpec, Interface, JointSpec, KinematicTree,
    Landmarks, RigSpec, TemplateModel, FORWARD_AXIS, TEMPLATE_LENGTH, UP_AXIS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BodyError {
    #[error("malformed template: {0}")]
    Malformed(String),
    #[error("cannot read template: {0}")]
    Io(String),
    #[error("mesh not closed")]
    NotClosed,
    #[error("mesh not orientable")]
    NotOrientable,
    #[error("non-manifold mesh: {0}")]
    NonManifold(String),
    #[error("skin weights of vertex {0} cannot be normalized")]
    WeightsNotNormalizable(usize),
    #[error("landmark vertices undefined")]
    Landmarks,
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

#[cfg(test)]
mod tests;
