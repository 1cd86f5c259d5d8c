use crate::autodiff::Real;
use crate::geom::{add, lift3, sub, V3};

use super::template::TemplateModel;
use super::BodyError;

/// Part-scaled vertices before reconnection: `v_t + B beta_g` per vertex,
/// with `g` the group of the vertex's part.
pub fn deform_shape<S: Real>(
    template: &TemplateModel,
    beta: &[[S; 4]],
) -> Result<Vec<V3<S>>, BodyError> {
    if beta.len() != template.num_groups() {
        return Err(BodyError::Dimension {
            what: "beta rows",
            expected: template.num_groups(),
            got: beta.len(),
        });
    }
    if beta.iter().flatten().any(|b| !b.value().is_finite()) {
        return Err(BodyError::NonFinite("beta"));
    }
    Ok(template
        .vertices_t
        .iter()
        .enumerate()
        .map(|(v, p)| {
            let b = &beta[template.group_of_vertex(v)];
            let basis = &template.shape_basis[v];
            [0, 1, 2].map(|k| {
                let row = basis[k];
                let mut d = b[0] * row[0];
                for c in 1..4 {
                    if row[c] != 0.0 {
                        d += b[c] * row[c];
                    }
                }
                d + p[k]
            })
        })
        .collect())
}

/// Vertices and joint locations after parts are stitched back together.
#[derive(Clone, Debug)]
pub struct Connected<S> {
    pub vertices: Vec<V3<S>>,
    /// Rotation centre of every joint.
    pub joints: Vec<V3<S>>,
    /// Where each non-root part attaches on its (connected) parent.
    pub attachments: Vec<Option<V3<S>>>,
    /// Rigid translation applied to each part.
    pub translations: Vec<V3<S>>,
}

fn ring_mean<S: Real>(points: &[V3<S>], ids: &[u32]) -> V3<S> {
    let mut m = [S::zero(); 3];
    for &i in ids {
        m = add(m, points[i as usize]);
    }
    // Same operation order as the template's ring means, so beta = 0 gives
    // exactly zero translation.
    let n = ids.len() as f64;
    [m[0] / n, m[1] / n, m[2] / n]
}

/// Translates every non-root part, root to leaves, so that its boundary ring
/// keeps the template offset to the matching ring on its parent.
pub fn reconnect_parts<S: Real>(template: &TemplateModel, shaped: Vec<V3<S>>) -> Connected<S> {
    let tree = &template.tree;
    let nj = tree.num_joints();
    let mut vertices = shaped;
    let mut joints: Vec<V3<S>> = tree.joint_rest_pos.iter().map(|&p| lift3(p)).collect();
    let mut attachments = vec![None; nj];
    let mut translations = vec![[S::zero(); 3]; nj];

    for &j in &tree.order {
        let Some(iface) = &template.interfaces[j] else {
            continue;
        };
        // Parent ring is already in its connected position.
        let parent_mean = ring_mean(&vertices, &iface.parent_ring);
        let child_mean = ring_mean(&vertices, &iface.child_ring);
        let delta = sub(
            sub(parent_mean, lift3(iface.parent_ring_mean)),
            sub(child_mean, lift3(iface.child_ring_mean)),
        );
        for &v in &template.part_vertices[j] {
            vertices[v as usize] = add(vertices[v as usize], delta);
        }
        let template_offset =
            [0, 1, 2].map(|k| iface.child_ring_mean[k] - iface.parent_ring_mean[k]);
        attachments[j] = Some(add(parent_mean, lift3(template_offset)));
        joints[j] = add(child_mean, delta);
        translations[j] = delta;
    }
    Connected {
        vertices,
        joints,
        attachments,
        translations,
    }
}

/// Rest-pose body for the given shape: deform then reconnect.
pub fn shaped_body<S: Real>(
    template: &TemplateModel,
    beta: &[[S; 4]],
) -> Result<Connected<S>, BodyError> {
    Ok(reconnect_parts(template, deform_shape(template, beta)?))
}
