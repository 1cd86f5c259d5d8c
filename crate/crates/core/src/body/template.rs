use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::obj::{parse_obj, ObjMesh};
use super::BodyError;

/// Body length of the template after loading, in meters.
pub const TEMPLATE_LENGTH: f64 = 2.6;

/// Model-space forward axis (+z). Up is +y.
pub const FORWARD_AXIS: usize = 2;
pub const UP_AXIS: usize = 1;

/// Rig sidecar as stored on disk (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    pub joints: Vec<JointSpec>,
    pub groups: Vec<GroupSpec>,
    /// Part (joint) index of every vertex.
    pub part_of_vertex: Vec<usize>,
    /// Sparse `(joint, weight)` pairs per vertex.
    pub skin_weights: Vec<Vec<(usize, f64)>>,
    pub landmarks: Landmarks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<String>,
    pub rest_position: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    /// Member joints. The first one is the reference side.
    pub joints: Vec<String>,
    /// Members that receive the sagittal mirror of the group rotation.
    #[serde(default)]
    pub mirrored: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmarks {
    pub rostrum_tip: usize,
    pub fluke_notch: usize,
}

/// Joint hierarchy with its grouping into jointly controlled parts.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicTree {
    pub names: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub joint_rest_pos: Vec<[f64; 3]>,
    pub group_of_joint: Vec<usize>,
    pub mirrored: Vec<bool>,
    pub group_names: Vec<String>,
    /// Parents always precede their children.
    pub order: Vec<usize>,
}

impl KinematicTree {
    pub fn num_joints(&self) -> usize {
        self.parent.len()
    }

    pub fn num_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }

    /// Parent group of every group; `None` for the root group.
    ///
    /// A group's parent is the group of the parent of its first
    /// non-mirrored member.
    pub fn group_parents(&self) -> Vec<Option<usize>> {
        (0..self.num_groups())
            .map(|g| {
                let reference = (0..self.num_joints())
                    .filter(|&j| self.group_of_joint[j] == g)
                    .find(|&j| !self.mirrored[j])
                    .or_else(|| (0..self.num_joints()).find(|&j| self.group_of_joint[j] == g))?;
                self.parent[reference].map(|p| self.group_of_joint[p])
            })
            .collect()
    }
}

/// Where a child part meets its parent, captured on the template.
#[derive(Clone, Debug, PartialEq)]
pub struct Interface {
    /// Child vertices that share an edge with the parent part.
    pub child_ring: Vec<u32>,
    /// Parent vertices that share an edge with the child part.
    pub parent_ring: Vec<u32>,
    pub child_ring_mean: [f64; 3],
    pub parent_ring_mean: [f64; 3],
}

/// The articulated template body.
#[derive(Clone, Debug)]
pub struct TemplateModel {
    pub vertices_t: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
    pub uv: Vec<[f64; 2]>,
    pub tree: KinematicTree,
    pub part_of_vertex: Vec<usize>,
    pub skin_weights: Vec<Vec<(u32, f64)>>,
    /// Per-vertex 3x4 block of the part shape basis: column 0 is the offset
    /// from the part centroid, columns 1..4 its x, y and z components.
    pub shape_basis: Vec<[[f64; 4]; 3]>,
    pub part_vertices: Vec<Vec<u32>>,
    pub part_centroid: Vec<[f64; 3]>,
    /// Indexed by joint; `None` for the root.
    pub interfaces: Vec<Option<Interface>>,
    pub landmarks: Landmarks,
}

/// Loads an OBJ mesh and its rig sidecar, validates them, and rescales the
/// body to [`TEMPLATE_LENGTH`].
pub fn load_template(mesh_source: &Path, rig_source: &Path) -> Result<TemplateModel, BodyError> {
    let mesh_text = std::fs::read_to_string(mesh_source)
        .map_err(|e| BodyError::Io(format!("{}: {e}", mesh_source.display())))?;
    let rig_text = std::fs::read_to_string(rig_source)
        .map_err(|e| BodyError::Io(format!("{}: {e}", rig_source.display())))?;
    let mesh = parse_obj(&mesh_text)?;
    let rig: RigSpec =
        serde_json::from_str(&rig_text).map_err(|e| BodyError::Malformed(format!("rig: {e}")))?;
    TemplateModel::from_assets(mesh, rig)
}

/// Checks that every undirected edge is used by exactly two faces with
/// opposite orientation.
pub fn check_closed(faces: &[[u32; 3]], num_vertices: usize) -> Result<(), BodyError> {
    let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::with_capacity(faces.len() * 3);
    for f in faces {
        if f.iter().any(|&i| i as usize >= num_vertices) {
            return Err(BodyError::Malformed(
                "face references a missing vertex".into(),
            ));
        }
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if a == b {
                return Err(BodyError::NonManifold("degenerate face".into()));
            }
            let key = (a.min(b), a.max(b));
            let e = edges.entry(key).or_insert((0, 0));
            if a < b {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    for (&(a, b), &(fwd, bwd)) in &edges {
        match (fwd, bwd) {
            (1, 1) => {}
            (1, 0) | (0, 1) => return Err(BodyError::NotClosed),
            (2, 0) | (0, 2) => return Err(BodyError::NotOrientable),
            _ => {
                return Err(BodyError::NonManifold(format!(
                    "edge ({a}, {b}) has {} faces",
                    fwd + bwd
                )))
            }
        }
    }
    Ok(())
}

fn build_tree(rig: &RigSpec) -> Result<KinematicTree, BodyError> {
    let n = rig.joints.len();
    if n == 0 {
        return Err(BodyError::Malformed("rig has no joints".into()));
    }
    let index: HashMap<&str, usize> = rig
        .joints
        .iter()
        .enumerate()
        .map(|(i, j)| (j.name.as_str(), i))
        .collect();
    if index.len() != n {
        return Err(BodyError::Malformed("duplicate joint names".into()));
    }
    let mut parent = Vec::with_capacity(n);
    for j in &rig.joints {
        parent.push(match &j.parent {
            None => None,
            Some(p) => Some(*index.get(p.as_str()).ok_or_else(|| {
                BodyError::Malformed(format!("joint `{}` has unknown parent `{p}`", j.name))
            })?),
        });
    }
    let roots: Vec<usize> = (0..n).filter(|&j| parent[j].is_none()).collect();
    if roots.len() != 1 {
        return Err(BodyError::Malformed(format!(
            "rig needs exactly one root joint, found {}",
            roots.len()
        )));
    }
    // Breadth-first from the root; joints never reached sit on a cycle.
    let mut order = vec![roots[0]];
    let mut head = 0;
    while head < order.len() {
        let j = order[head];
        head += 1;
        order.extend((0..n).filter(|&c| parent[c] == Some(j)));
    }
    if order.len() != n {
        return Err(BodyError::Malformed(
            "joint hierarchy contains a cycle".into(),
        ));
    }

    let mut group_of_joint = vec![usize::MAX; n];
    let mut mirrored = vec![false; n];
    for (g, group) in rig.groups.iter().enumerate() {
        if group.joints.is_empty() {
            return Err(BodyError::Malformed(format!(
                "group `{}` is empty",
                group.name
            )));
        }
        for name in &group.joints {
            let j = *index.get(name.as_str()).ok_or_else(|| {
                BodyError::Malformed(format!(
                    "group `{}` names unknown joint `{name}`",
                    group.name
                ))
            })?;
            if group_of_joint[j] != usize::MAX {
                return Err(BodyError::Malformed(format!(
                    "joint `{name}` is in two groups"
                )));
            }
            group_of_joint[j] = g;
        }
        for name in &group.mirrored {
            let j = *index
                .get(name.as_str())
                .filter(|&&j| group_of_joint[j] == g)
                .ok_or_else(|| {
                    BodyError::Malformed(format!(
                        "mirrored joint `{name}` not in group `{}`",
                        group.name
                    ))
                })?;
            mirrored[j] = true;
        }
    }
    if let Some(j) = group_of_joint.iter().position(|&g| g == usize::MAX) {
        return Err(BodyError::Malformed(format!(
            "joint `{}` belongs to no group",
            rig.joints[j].name
        )));
    }
    if group_of_joint[roots[0]] != 0 {
        return Err(BodyError::Malformed(
            "the first group must contain the root joint".into(),
        ));
    }

    Ok(KinematicTree {
        names: rig.joints.iter().map(|j| j.name.clone()).collect(),
        parent,
        joint_rest_pos: rig.joints.iter().map(|j| j.rest_position).collect(),
        group_of_joint,
        mirrored,
        group_names: rig.groups.iter().map(|g| g.name.clone()).collect(),
        order,
    })
}

fn mean_of(points: &[[f64; 3]], ids: &[u32]) -> [f64; 3] {
    let mut m = [0.0; 3];
    for &i in ids {
        for k in 0..3 {
            m[k] += points[i as usize][k];
        }
    }
    m.map(|c| c / ids.len() as f64)
}

impl TemplateModel {
    /// Validates a parsed mesh and rig and rescales to [`TEMPLATE_LENGTH`].
    pub fn from_assets(mesh: ObjMesh, rig: RigSpec) -> Result<Self, BodyError> {
        let nv = mesh.vertices.len();
        if nv == 0 || mesh.faces.is_empty() {
            return Err(BodyError::Malformed("empty mesh".into()));
        }
        if mesh.uv.len() != nv {
            return Err(BodyError::Malformed(
                "uv count differs from vertex count".into(),
            ));
        }
        if mesh.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(BodyError::Malformed("non-finite vertex coordinate".into()));
        }
        check_closed(&mesh.faces, nv)?;

        let tree = build_tree(&rig)?;
        let nj = tree.num_joints();

        if rig.part_of_vertex.len() != nv {
            return Err(BodyError::Malformed(format!(
                "part_of_vertex has {} entries for {nv} vertices",
                rig.part_of_vertex.len()
            )));
        }
        if let Some(&p) = rig.part_of_vertex.iter().find(|&&p| p >= nj) {
            return Err(BodyError::Malformed(format!("part index {p} out of range")));
        }
        if rig.skin_weights.len() != nv {
            return Err(BodyError::Malformed(
                "skin weight row count differs from vertex count".into(),
            ));
        }
        let mut skin_weights = Vec::with_capacity(nv);
        for (v, row) in rig.skin_weights.iter().enumerate() {
            if row
                .iter()
                .any(|&(j, w)| j >= nj || !(w >= 0.0) || !w.is_finite())
            {
                return Err(BodyError::WeightsNotNormalizable(v));
            }
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            if !(total > 0.0) {
                return Err(BodyError::WeightsNotNormalizable(v));
            }
            skin_weights.push(
                row.iter()
                    .filter(|&&(_, w)| w > 0.0)
                    .map(|&(j, w)| (j as u32, w / total))
                    .collect::<Vec<_>>(),
            );
        }
        let Landmarks {
            rostrum_tip,
            fluke_notch,
        } = rig.landmarks;
        if rostrum_tip >= nv || fluke_notch >= nv || rostrum_tip == fluke_notch {
            return Err(BodyError::Landmarks);
        }

        let extent = (mesh.vertices[rostrum_tip][FORWARD_AXIS]
            - mesh.vertices[fluke_notch][FORWARD_AXIS])
            .abs();
        if !(extent > 0.0) {
            return Err(BodyError::Landmarks);
        }
        let s = TEMPLATE_LENGTH / extent;
        let vertices_t: Vec<[f64; 3]> = mesh.vertices.iter().map(|v| v.map(|c| c * s)).collect();
        let mut tree = tree;
        for p in &mut tree.joint_rest_pos {
            *p = p.map(|c| c * s);
        }

        let mut part_vertices = vec![Vec::new(); nj];
        for (v, &p) in rig.part_of_vertex.iter().enumerate() {
            part_vertices[p].push(v as u32);
        }
        if let Some(j) = part_vertices.iter().position(|vs| vs.is_empty()) {
            return Err(BodyError::Malformed(format!(
                "part `{}` has no vertices",
                tree.names[j]
            )));
        }
        let part_centroid: Vec<[f64; 3]> = part_vertices
            .iter()
            .map(|ids| mean_of(&vertices_t, ids))
            .collect();

        let shape_basis = vertices_t
            .iter()
            .zip(&rig.part_of_vertex)
            .map(|(v, &p)| {
                let d = [0, 1, 2].map(|k| v[k] - part_centroid[p][k]);
                [
                    [d[0], d[0], 0.0, 0.0],
                    [d[1], 0.0, d[1], 0.0],
                    [d[2], 0.0, 0.0, d[2]],
                ]
            })
            .collect();

        // Interface rings between each part and its parent.
        let mut touching: Vec<Vec<BTreeSet<u32>>> = vec![vec![BTreeSet::new(); nj]; nj];
        for f in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let (pa, pb) = (
                    rig.part_of_vertex[a as usize],
                    rig.part_of_vertex[b as usize],
                );
                if pa != pb {
                    touching[pa][pb].insert(a);
                    touching[pb][pa].insert(b);
                }
            }
        }
        let mut interfaces = vec![None; nj];
        for j in 0..nj {
            let Some(p) = tree.parent[j] else { continue };
            let child_ring: Vec<u32> = touching[j][p].iter().copied().collect();
            let parent_ring: Vec<u32> = touching[p][j].iter().copied().collect();
            if child_ring.is_empty() || parent_ring.is_empty() {
                return Err(BodyError::Malformed(format!(
                    "part `{}` does not touch its parent `{}`",
                    tree.names[j], tree.names[p]
                )));
            }
            interfaces[j] = Some(Interface {
                child_ring_mean: mean_of(&vertices_t, &child_ring),
                parent_ring_mean: mean_of(&vertices_t, &parent_ring),
                child_ring,
                parent_ring,
            });
        }

        Ok(TemplateModel {
            vertices_t,
            faces: mesh.faces,
            uv: mesh.uv,
            tree,
            part_of_vertex: rig.part_of_vertex,
            skin_weights,
            shape_basis,
            part_vertices,
            part_centroid,
            interfaces,
            landmarks: rig.landmarks,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices_t.len()
    }

    pub fn num_groups(&self) -> usize {
        self.tree.num_groups()
    }

    pub fn group_of_vertex(&self, v: usize) -> usize {
        self.tree.group_of_joint[self.part_of_vertex[v]]
    }
}

/// Body length measured between the landmark vertices along the forward axis.
pub fn rest_length(vertices: &[[f64; 3]], landmarks: Landmarks) -> Result<f64, BodyError> {
    let (a, b) = (
        vertices
            .get(landmarks.rostrum_tip)
            .ok_or(BodyError::Landmarks)?,
        vertices
            .get(landmarks.fluke_notch)
            .ok_or(BodyError::Landmarks)?,
    );
    Ok((a[FORWARD_AXIS] - b[FORWARD_AXIS]).abs())
}
