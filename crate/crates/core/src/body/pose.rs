use crate::autodiff::Real;
use crate::geom::{add, identity, mat_mul, mat_vec, sub, M3, V3};

use super::shape::Connected;
use super::template::{TemplateModel, FORWARD_AXIS};
use super::BodyError;

/// Below this angle the rotation uses its second-order expansion.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Rotation matrix of an axis-angle (Rodrigues) vector.
pub fn rodrigues<S: Real>(w: V3<S>) -> M3<S> {
    let one = S::from(1.0);
    let zero = S::zero();
    let k = [
        [zero, -w[2], w[1]],
        [w[2], zero, -w[0]],
        [-w[1], w[0], zero],
    ];
    let k2 = mat_mul(&k, &k);
    let theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let (a, b) = if theta2.value().sqrt() < SMALL_ANGLE {
        (one, S::from(0.5))
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (one - theta.cos()) / theta2)
    };
    let mut r = identity::<S>();
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = r[i][j] + k[i][j] * a + k2[i][j] * b;
        }
    }
    r
}

/// Reflection of a rotation vector through the sagittal (x = 0) plane.
pub fn mirror_rotation<S: Real>(w: V3<S>) -> V3<S> {
    [w[0], -w[1], -w[2]]
}

/// Local rotation vector of every joint for one frame's group rotations.
/// Joints of the root group do not articulate; the root row is the global
/// orientation.
pub fn joint_rotations<S: Real>(template: &TemplateModel, theta_t: &[V3<S>]) -> Vec<Option<V3<S>>> {
    let tree = &template.tree;
    (0..tree.num_joints())
        .map(|j| {
            let g = tree.group_of_joint[j];
            if g == 0 {
                None
            } else if tree.mirrored[j] {
                Some(mirror_rotation(theta_t[g]))
            } else {
                Some(theta_t[g])
            }
        })
        .collect()
}

/// Posed vertices of one frame: linear blend skinning over the chain, then
/// the global rotation `theta_t[0]` and the root translation.
pub fn pose_mesh<S: Real>(
    template: &TemplateModel,
    body: &Connected<S>,
    theta_t: &[V3<S>],
    translation: V3<S>,
) -> Result<Vec<V3<S>>, BodyError> {
    if theta_t.len() != template.num_groups() {
        return Err(BodyError::Dimension {
            what: "theta rows",
            expected: template.num_groups(),
            got: theta_t.len(),
        });
    }
    let tree = &template.tree;
    let nj = tree.num_joints();
    let local = joint_rotations(template, theta_t);

    // Skinning transforms x -> rot x + trans, composed root to leaf.
    let mut rot: Vec<M3<S>> = vec![identity(); nj];
    let mut trans: Vec<V3<S>> = vec![[S::zero(); 3]; nj];
    let mut moves = vec![false; nj];
    for &j in &tree.order {
        let Some(p) = tree.parent[j] else { continue };
        match local[j] {
            Some(w) => {
                let r = rodrigues(w);
                let pivot = body.joints[j];
                let local_t = sub(pivot, mat_vec(&r, pivot));
                rot[j] = mat_mul(&rot[p], &r);
                trans[j] = add(mat_vec(&rot[p], local_t), trans[p]);
                moves[j] = true;
            }
            None => {
                rot[j] = rot[p];
                trans[j] = trans[p];
                moves[j] = moves[p];
            }
        }
    }

    let global = rodrigues(theta_t[0]);
    let out = body
        .vertices
        .iter()
        .zip(&template.skin_weights)
        .map(|(&v, weights)| {
            let mut p = v;
            for &(j, w) in weights {
                let j = j as usize;
                if !moves[j] {
                    continue;
                }
                let d = sub(add(mat_vec(&rot[j], v), trans[j]), v);
                p = [p[0] + d[0] * w, p[1] + d[1] * w, p[2] + d[2] * w];
            }
            add(mat_vec(&global, p), translation)
        })
        .collect();
    Ok(out)
}

/// Forward vector of the body after rotating by the global orientation.
pub fn rotated_forward<S: Real>(global: V3<S>) -> V3<S> {
    let r = rodrigues(global);
    [r[0][FORWARD_AXIS], r[1][FORWARD_AXIS], r[2][FORWARD_AXIS]]
}
