use proptest::prelude::*;

use super::procedural::{
    mirror_map, reference_dolphin, reference_template, toy_tube, DOLPHIN_AROUND,
};
use super::*;

fn zero_beta(t: &TemplateModel) -> Vec<[f64; 4]> {
    vec![[0.0; 4]; t.num_groups()]
}

fn zero_theta(t: &TemplateModel) -> Vec<[f64; 3]> {
    vec![[0.0; 3]; t.num_groups()]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[test]
fn reference_template_has_expected_rig() {
    let t = reference_template().unwrap();
    assert_eq!(t.num_vertices(), 722);
    assert_eq!(t.faces.len(), 1440);
    assert_eq!(t.tree.num_joints(), 9);
    assert_eq!(t.num_groups(), 8);
    assert_eq!(t.tree.names[t.tree.root()], "torso_front");
    let len = rest_length(&t.vertices_t, t.landmarks).unwrap();
    assert!((len - TEMPLATE_LENGTH).abs() < 1e-6, "{len}");
    for row in &t.skin_weights {
        let s: f64 = row.iter().map(|w| w.1).sum();
        assert!((s - 1.0).abs() < 1e-6);
        assert!(row.iter().all(|w| w.1 >= 0.0));
    }
}

#[test]
fn load_rescales_by_extent() {
    let (mesh, rig) = reference_dolphin();
    let extent = (mesh.vertices[0][2] - mesh.vertices[mesh.vertices.len() - 1][2]).abs();
    let t = TemplateModel::from_assets(mesh.clone(), rig).unwrap();
    let s = TEMPLATE_LENGTH / extent;
    for (a, b) in t.vertices_t.iter().zip(&mesh.vertices) {
        for k in 0..3 {
            assert_eq!(a[k], b[k] * s);
        }
    }
}

#[test]
fn load_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, rig) = reference_dolphin();
    let mesh_path = dir.path().join("dolphin.obj");
    let rig_path = dir.path().join("dolphin_rig.json");
    std::fs::write(
        &mesh_path,
        write_obj(&mesh.vertices, Some(&mesh.uv), &mesh.faces),
    )
    .unwrap();
    std::fs::write(&rig_path, serde_json::to_string(&rig).unwrap()).unwrap();
    let t = load_template(&mesh_path, &rig_path).unwrap();
    let len = rest_length(&t.vertices_t, t.landmarks).unwrap();
    assert!((len - TEMPLATE_LENGTH).abs() < 1e-6);
}

#[test]
fn hole_is_not_closed() {
    let (mut mesh, rig) = reference_dolphin();
    mesh.faces.pop();
    assert_eq!(
        TemplateModel::from_assets(mesh, rig).unwrap_err(),
        BodyError::NotClosed
    );
}

#[test]
fn flipped_face_is_not_orientable() {
    let (mut mesh, rig) = reference_dolphin();
    mesh.faces[100].swap(1, 2);
    assert_eq!(
        TemplateModel::from_assets(mesh, rig).unwrap_err(),
        BodyError::NotOrientable
    );
}

#[test]
fn zero_weight_row_rejected() {
    let (mesh, mut rig) = reference_dolphin();
    rig.skin_weights[7] = vec![(0, 0.0)];
    assert_eq!(
        TemplateModel::from_assets(mesh, rig).unwrap_err(),
        BodyError::WeightsNotNormalizable(7)
    );
}

#[test]
fn unknown_rig_key_rejected() {
    let (_, rig) = reference_dolphin();
    let mut v = serde_json::to_value(&rig).unwrap();
    v["landmark"] = serde_json::json!(1);
    assert!(serde_json::from_value::<RigSpec>(v).is_err());
}

#[test]
fn zero_beta_is_identity() {
    let t = reference_template().unwrap();
    let shaped = deform_shape(&t, &zero_beta(&t)).unwrap();
    assert_eq!(shaped, t.vertices_t);
    let body = reconnect_parts(&t, shaped);
    assert_eq!(body.vertices, t.vertices_t);
    assert!(body.translations.iter().flatten().all(|&c| c == 0.0));
}

#[test]
fn wrong_beta_shape_rejected() {
    let t = reference_template().unwrap();
    let err = deform_shape(&t, &[[0.0; 4]; 3]).unwrap_err();
    assert!(matches!(
        err,
        BodyError::Dimension {
            expected: 8,
            got: 3,
            ..
        }
    ));
    let mut beta = zero_beta(&t);
    beta[2][1] = f64::NAN;
    assert_eq!(
        deform_shape(&t, &beta).unwrap_err(),
        BodyError::NonFinite("beta")
    );
}

#[test]
fn uniform_coefficient_doubles_about_centroid() {
    let t = reference_template().unwrap();
    let g = 3;
    let mut beta = zero_beta(&t);
    beta[g] = [1.0, 0.0, 0.0, 0.0];
    let shaped = deform_shape(&t, &beta).unwrap();
    for v in 0..t.num_vertices() {
        let p = t.vertices_t[v];
        if t.group_of_vertex(v) == g {
            let c = t.part_centroid[t.part_of_vertex[v]];
            for k in 0..3 {
                assert!((shaped[v][k] - (p[k] + (p[k] - c[k]))).abs() < 1e-15);
            }
        } else {
            assert_eq!(shaped[v], p);
        }
    }
}

#[test]
fn x_coefficient_moves_only_x() {
    let t = reference_template().unwrap();
    let mut beta = zero_beta(&t);
    beta[1] = [0.0, 1.0, 0.0, 0.0];
    let shaped = deform_shape(&t, &beta).unwrap();
    let mut moved = 0;
    for v in 0..t.num_vertices() {
        assert_eq!(shaped[v][1], t.vertices_t[v][1]);
        assert_eq!(shaped[v][2], t.vertices_t[v][2]);
        moved += usize::from(shaped[v][0] != t.vertices_t[v][0]);
    }
    assert!(moved > 0);
}

#[test]
fn root_scaling_pushes_descendants_without_gaps() {
    let t = reference_template().unwrap();
    let mut beta = zero_beta(&t);
    beta[0] = [0.5, 0.0, 0.0, 0.0];
    let body = shaped_body(&t, &beta).unwrap();
    let head = t.tree.names.iter().position(|n| n == "head").unwrap();
    let rear = t.tree.names.iter().position(|n| n == "torso_rear").unwrap();
    // Head moves forward (+z), the rear backward.
    assert!(body.translations[head][2] > 1e-3);
    assert!(body.translations[rear][2] < -1e-3);
    for j in 0..t.tree.num_joints() {
        if let Some(a) = body.attachments[j] {
            assert!(dist(a, body.joints[j]) < 1e-9);
        }
    }
}

#[test]
fn leaf_scaling_moves_only_the_leaf() {
    let t = reference_template().unwrap();
    let fluke_group = t
        .tree
        .group_names
        .iter()
        .position(|n| n == "fluke")
        .unwrap();
    let mut beta = zero_beta(&t);
    beta[fluke_group] = [0.3, 0.1, 0.0, -0.1];
    let body = shaped_body(&t, &beta).unwrap();
    for v in 0..t.num_vertices() {
        if t.group_of_vertex(v) != fluke_group {
            assert_eq!(body.vertices[v], t.vertices_t[v]);
        }
    }
}

#[test]
fn uniform_doubling_roughly_doubles_length() {
    let t = reference_template().unwrap();
    let beta = vec![[1.0, 0.0, 0.0, 0.0]; t.num_groups()];
    let body = shaped_body(&t, &beta).unwrap();
    let len = rest_length(&body.vertices, t.landmarks).unwrap();
    // Parts double about their own centroids and are chained through
    // interface rings, so the gaps between ring means are not doubled.
    assert!(len > 4.6 && len < 5.2 + 1e-9, "{len}");
}

#[test]
fn head_scaling_adds_head_extent_only() {
    let t = reference_template().unwrap();
    let head = t.tree.names.iter().position(|n| n == "head").unwrap();
    let rostrum = t.tree.names.iter().position(|n| n == "rostrum").unwrap();
    let mut beta = zero_beta(&t);
    beta[t.tree.group_of_joint[head]] = [1.0, 0.0, 0.0, 0.0];
    let body = shaped_body(&t, &beta).unwrap();
    let len = rest_length(&body.vertices, t.landmarks).unwrap();
    let front_ring = t.interfaces[rostrum].as_ref().unwrap().parent_ring_mean;
    let back_ring = t.interfaces[head].as_ref().unwrap().child_ring_mean;
    let head_extent = (front_ring[2] - back_ring[2]).abs();
    assert!(
        (len - (TEMPLATE_LENGTH + head_extent)).abs() < 1e-9,
        "{len} {head_extent}"
    );
}

#[test]
fn pose_identity_and_translation() {
    let t = reference_template().unwrap();
    let body = shaped_body(&t, &zero_beta(&t)).unwrap();
    let posed = pose_mesh(&t, &body, &zero_theta(&t), [0.0; 3]).unwrap();
    assert_eq!(posed, body.vertices);
    let moved = pose_mesh(&t, &body, &zero_theta(&t), [1.0, 2.0, 3.0]).unwrap();
    for (a, b) in moved.iter().zip(&body.vertices) {
        assert_eq!(*a, [b[0] + 1.0, b[1] + 2.0, b[2] + 3.0]);
    }
}

/// Three rigid parts stacked along z with one-hot weights.
fn chain() -> TemplateModel {
    let (mesh, mut rig) = toy_tube();
    let n = mesh.vertices.len();
    let part: Vec<usize> = (0..n)
        .map(|v| {
            let z = mesh.vertices[v][2];
            if z > 0.15 {
                0
            } else if z > -0.15 {
                1
            } else {
                2
            }
        })
        .collect();
    rig.joints.push(JointSpec {
        name: "tip".into(),
        parent: Some("back".into()),
        rest_position: [0.0; 3],
    });
    rig.groups.push(GroupSpec {
        name: "tip".into(),
        joints: vec!["tip".into()],
        mirrored: vec![],
    });
    rig.skin_weights = part.iter().map(|&p| vec![(p, 1.0)]).collect();
    rig.part_of_vertex = part;
    TemplateModel::from_assets(mesh, rig).unwrap()
}

fn rotate_about(r: &[[f64; 3]; 3], pivot: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let d = [v[0] - pivot[0], v[1] - pivot[1], v[2] - pivot[2]];
    let rd = [
        r[0][0] * d[0] + r[0][1] * d[1] + r[0][2] * d[2],
        r[1][0] * d[0] + r[1][1] * d[1] + r[1][2] * d[2],
        r[2][0] * d[0] + r[2][1] * d[1] + r[2][2] * d[2],
    ];
    [rd[0] + pivot[0], rd[1] + pivot[1], rd[2] + pivot[2]]
}

#[test]
fn chain_matches_forward_kinematics() {
    let t = chain();
    let body = shaped_body(&t, &zero_beta(&t)).unwrap();
    let mut theta = zero_theta(&t);
    theta[1] = [0.3, -0.2, 0.1];
    theta[2] = [-0.4, 0.25, 0.0];
    let posed = pose_mesh(&t, &body, &theta, [0.0; 3]).unwrap();

    // Explicit FK: the tip rotates about its joint, then tip and middle
    // rotate together about the middle joint.
    let r1 = rodrigues(theta[1]);
    let r2 = rodrigues(theta[2]);
    for v in 0..t.num_vertices() {
        let p = body.vertices[v];
        let expect = match t.part_of_vertex[v] {
            0 => p,
            1 => rotate_about(&r1, body.joints[1], p),
            _ => rotate_about(&r1, body.joints[1], rotate_about(&r2, body.joints[2], p)),
        };
        assert!(dist(posed[v], expect) < 1e-12, "vertex {v}");
    }
}

#[test]
fn global_rotation_is_rigid() {
    let t = reference_template().unwrap();
    let body = shaped_body(&t, &zero_beta(&t)).unwrap();
    let mut theta = zero_theta(&t);
    theta[0] = [0.1, 1.2, -0.3];
    let posed = pose_mesh(&t, &body, &theta, [0.5, -1.0, 2.0]).unwrap();
    for (a, b) in [(0, 400), (10, 721), (55, 300)] {
        let before = dist(body.vertices[a], body.vertices[b]);
        let after = dist(posed[a], posed[b]);
        assert!((before - after).abs() < 1e-12);
    }
}

fn mirrored(p: [f64; 3]) -> [f64; 3] {
    [-p[0], p[1], p[2]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn deformation_is_local(g in 0usize..8, row in prop::array::uniform4(-0.5f64..0.5)) {
        let t = reference_template().unwrap();
        let mut beta = zero_beta(&t);
        beta[g] = row;
        let shaped = deform_shape(&t, &beta).unwrap();
        for v in 0..t.num_vertices() {
            if t.group_of_vertex(v) != g {
                prop_assert_eq!(shaped[v], t.vertices_t[v]);
            }
        }
    }

    #[test]
    fn joints_coincide_after_reconnect(rows in prop::collection::vec(prop::array::uniform4(-0.3f64..0.3), 8)) {
        let t = reference_template().unwrap();
        let body = shaped_body(&t, &rows).unwrap();
        for j in 0..t.tree.num_joints() {
            if let Some(a) = body.attachments[j] {
                prop_assert!(dist(a, body.joints[j]) < 1e-9);
            }
        }
    }

    #[test]
    fn symmetric_parameters_give_symmetric_mesh(
        rows in prop::collection::vec(prop::array::uniform4(-0.3f64..0.3), 8),
        pitches in prop::collection::vec(-0.4f64..0.4, 8),
        fin in prop::array::uniform3(-0.6f64..0.6),
    ) {
        let t = reference_template().unwrap();
        let theta: Vec<[f64; 3]> = (0..8).map(|g| if g == 7 { fin } else { [pitches[g], 0.0, 0.0] }).collect();
        let body = shaped_body(&t, &rows).unwrap();
        let posed = pose_mesh(&t, &body, &theta, [0.0, -0.3, 1.0]).unwrap();
        let partner = mirror_map(t.num_vertices(), DOLPHIN_AROUND);
        for v in 0..t.num_vertices() {
            prop_assert!(dist(mirrored(posed[v]), posed[partner[v]]) < 1e-9);
        }
    }
}
