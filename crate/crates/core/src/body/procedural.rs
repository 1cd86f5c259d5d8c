//! Built-in template assets: a reference dolphin with a nine-part rig and a
//! small two-part tube used for gradient checks.
//!
//! Both are generalized cylinders along -z (rostrum at +z) with fan caps,
//! built at unit length; loading rescales them to the template length.

use std::f64::consts::PI;

use super::obj::ObjMesh;
use super::template::{GroupSpec, JointSpec, Landmarks, RigSpec, TemplateModel};
use super::BodyError;

/// Piecewise-linear profile through `(s, value)` knots.
fn profile(knots: &[(f64, f64)], s: f64) -> f64 {
    if s <= knots[0].0 {
        return knots[0].1;
    }
    for w in knots.windows(2) {
        let ((s0, v0), (s1, v1)) = (w[0], w[1]);
        if s <= s1 {
            return v0 + (v1 - v0) * (s - s0) / (s1 - s0);
        }
    }
    knots[knots.len() - 1].1
}

/// Raw tube: vertex 0 is the front cap, then `rings` rings of `around`
/// vertices, then the back cap. Also returns the arclength parameter of every
/// vertex.
struct Tube {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    s: Vec<f64>,
    around: usize,
}

impl Tube {
    fn new(
        rings: usize,
        around: usize,
        half_width: impl Fn(f64) -> f64,
        half_height: impl Fn(f64) -> f64,
    ) -> Self {
        // cos/sin tables that are exactly mirror-symmetric about x = 0.
        let mut cs = vec![[0.0, 0.0]; around];
        for (j, c) in cs.iter_mut().enumerate() {
            let phi = 2.0 * PI * j as f64 / around as f64;
            *c = [phi.cos(), phi.sin()];
        }
        for j in 0..around {
            let m = mirror_index(j, around);
            if m > j {
                cs[m] = [-cs[j][0], cs[j][1]];
            }
        }

        let mut vertices = vec![[0.0, 0.0, 0.5]];
        let mut s = vec![0.0];
        for i in 0..rings {
            let si = (i + 1) as f64 / (rings + 1) as f64;
            let (a, b) = (half_width(si), half_height(si));
            for c in &cs {
                vertices.push([a * c[0], b * c[1], 0.5 - si]);
                s.push(si);
            }
        }
        vertices.push([0.0, 0.0, -0.5]);
        s.push(1.0);

        let last = (vertices.len() - 1) as u32;
        let at = |i: usize, j: usize| (1 + i * around + j % around) as u32;
        let mut faces = Vec::with_capacity(2 * around * rings);
        for j in 0..around {
            faces.push([0, at(0, j + 1), at(0, j)]);
        }
        // Quads on the two sides of the sagittal plane get mirrored
        // diagonals so edge adjacency is symmetric too.
        for i in 0..rings - 1 {
            for j in 0..around {
                let (a, b, c, d) = (at(i, j), at(i, j + 1), at(i + 1, j + 1), at(i + 1, j));
                let mid = 2.0 * PI * (j as f64 + 0.5) / around as f64;
                if mid.cos() >= 0.0 {
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                } else {
                    faces.push([a, b, d]);
                    faces.push([b, c, d]);
                }
            }
        }
        for j in 0..around {
            faces.push([last, at(rings - 1, j), at(rings - 1, j + 1)]);
        }
        let mut tube = Tube {
            vertices,
            faces,
            s,
            around,
        };
        if signed_volume(&tube.vertices, &tube.faces) < 0.0 {
            for f in &mut tube.faces {
                f.swap(1, 2);
            }
        }
        tube
    }

    fn ring_vertex(&self, i: usize, j: usize) -> usize {
        1 + i * self.around + j
    }

    fn uv(&self) -> Vec<[f64; 2]> {
        let max_x = self
            .vertices
            .iter()
            .map(|v| v[0].abs())
            .fold(0.0, f64::max)
            .max(1e-12);
        self.vertices
            .iter()
            .zip(&self.s)
            .map(|(v, &s)| [(0.5 + 0.5 * v[0] / max_x).clamp(0.0, 1.0), s])
            .collect()
    }

    /// Moves the origin to the volume centroid along y and z. x is left
    /// alone so the sagittal plane stays exactly at 0.
    fn center(&mut self) {
        let c = volume_centroid(&self.vertices, &self.faces);
        for v in &mut self.vertices {
            v[1] -= c[1];
            v[2] -= c[2];
        }
    }
}

/// Ring index of the sagittal mirror of around-index `j`.
pub fn mirror_index(j: usize, around: usize) -> usize {
    (around + around / 2 - j) % around
}

fn signed_volume(vertices: &[[f64; 3]], faces: &[[u32; 3]]) -> f64 {
    faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]))
                / 6.0
        })
        .sum()
}

fn volume_centroid(vertices: &[[f64; 3]], faces: &[[u32; 3]]) -> [f64; 3] {
    let mut acc = [0.0; 3];
    let mut vol = 0.0;
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let v = (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))
            / 6.0;
        vol += v;
        for k in 0..3 {
            acc[k] += v * (a[k] + b[k] + c[k]) / 4.0;
        }
    }
    acc.map(|x| x / vol)
}

// Joint names of the reference rig, in joint order.
const ROSTRUM: usize = 0;
const HEAD: usize = 1;
const TORSO_FRONT: usize = 2;
const TORSO_REAR: usize = 3;
const PEDUNCLE: usize = 4;
const FLUKE: usize = 5;
const DORSAL: usize = 6;
const PECTORAL_R: usize = 7;
const PECTORAL_L: usize = 8;

const JOINTS: [(&str, Option<&str>); 9] = [
    ("rostrum", Some("head")),
    ("head", Some("torso_front")),
    ("torso_front", None),
    ("torso_rear", Some("torso_front")),
    ("peduncle", Some("torso_rear")),
    ("fluke", Some("peduncle")),
    ("dorsal", Some("torso_rear")),
    ("pectoral_r", Some("torso_front")),
    ("pectoral_l", Some("torso_front")),
];

/// Axial part boundaries: rostrum | head | torso_front | torso_rear |
/// peduncle | fluke.
const AXIAL_BOUNDS: [f64; 5] = [0.075, 0.2, 0.45, 0.7, 0.86];
const AXIAL_PARTS: [usize; 6] = [ROSTRUM, HEAD, TORSO_FRONT, TORSO_REAR, PEDUNCLE, FLUKE];
const BLEND: f64 = 0.04;

const HALF_WIDTH: [(f64, f64); 15] = [
    (0.0, 0.0),
    (0.03, 0.012),
    (0.075, 0.02),
    (0.12, 0.045),
    (0.2, 0.07),
    (0.3, 0.085),
    (0.4, 0.09),
    (0.5, 0.085),
    (0.6, 0.07),
    (0.7, 0.05),
    (0.8, 0.03),
    (0.86, 0.022),
    (0.9, 0.06),
    (0.95, 0.09),
    (1.0, 0.05),
];

const HALF_HEIGHT: [(f64, f64); 15] = [
    (0.0, 0.0),
    (0.03, 0.012),
    (0.075, 0.02),
    (0.12, 0.045),
    (0.2, 0.068),
    (0.3, 0.08),
    (0.4, 0.085),
    (0.5, 0.08),
    (0.6, 0.07),
    (0.7, 0.055),
    (0.8, 0.04),
    (0.86, 0.026),
    (0.9, 0.012),
    (0.95, 0.008),
    (1.0, 0.006),
];

fn axial_part(s: f64) -> usize {
    AXIAL_PARTS[AXIAL_BOUNDS.iter().filter(|&&b| s >= b).count()]
}

/// Skin weights of an axial vertex, blended across the nearest boundary.
fn axial_weights(s: f64) -> Vec<(usize, f64)> {
    let (k, b) = AXIAL_BOUNDS
        .iter()
        .enumerate()
        .min_by(|a, b| (s - a.1).abs().total_cmp(&(s - b.1).abs()))
        .map(|(k, &b)| (k, b))
        .unwrap();
    let (front, back) = (AXIAL_PARTS[k], AXIAL_PARTS[k + 1]);
    let w_back = (0.5 + (s - b) / (2.0 * BLEND)).clamp(0.0, 1.0);
    [(front, 1.0 - w_back), (back, w_back)]
        .into_iter()
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

fn tent(s: f64, lo: f64, peak: f64, hi: f64) -> f64 {
    if s <= lo || s >= hi {
        0.0
    } else if s < peak {
        (s - lo) / (peak - lo)
    } else {
        (hi - s) / (hi - peak)
    }
}

/// Reference dolphin: 36 rings of 20 vertices (722 vertices, 1440 faces)
/// with a nine-part rig in eight groups; the pectoral fins share a group.
pub fn reference_dolphin() -> (ObjMesh, RigSpec) {
    let (rings, around) = (36, 20);
    let mut tube = Tube::new(
        rings,
        around,
        |s| profile(&HALF_WIDTH, s),
        |s| profile(&HALF_HEIGHT, s),
    );
    let nv = tube.vertices.len();
    let mut part = vec![0; nv];
    let mut weights = vec![Vec::new(); nv];
    for v in 0..nv {
        part[v] = axial_part(tube.s[v]);
        weights[v] = axial_weights(tube.s[v]);
    }

    let top = around / 4;
    let right = around - 1;
    let left = mirror_index(right, around);
    for i in 0..rings {
        let s = (i + 1) as f64 / (rings + 1) as f64;
        let fin = tent(s, 0.47, 0.55, 0.63);
        if fin > 0.0 {
            let v = tube.ring_vertex(i, top);
            tube.vertices[v][1] += 0.06 * fin;
            tube.vertices[v][2] -= 0.02 * fin;
            part[v] = DORSAL;
            weights[v] = vec![(DORSAL, 1.0)];
        }
        let fin = tent(s, 0.22, 0.26, 0.31);
        if fin > 0.0 {
            for (j, joint) in [(right, PECTORAL_R), (left, PECTORAL_L)] {
                let v = tube.ring_vertex(i, j);
                let p = &mut tube.vertices[v];
                let dir = p[0].signum();
                p[0] += dir * 0.07 * fin;
                p[1] -= 0.03 * fin;
                p[2] -= 0.03 * fin;
                part[v] = joint;
                weights[v] = vec![(joint, 1.0)];
            }
        }
    }
    tube.center();
    let uv = tube.uv();

    let joint_pos = part_means(&tube.vertices, &part, JOINTS.len());
    let joints = JOINTS
        .iter()
        .zip(&joint_pos)
        .map(|(&(name, parent), &p)| JointSpec {
            name: name.into(),
            parent: parent.map(Into::into),
            rest_position: p,
        })
        .collect();
    let group = |name: &str, joints: &[&str], mirrored: &[&str]| GroupSpec {
        name: name.into(),
        joints: joints.iter().map(|s| s.to_string()).collect(),
        mirrored: mirrored.iter().map(|s| s.to_string()).collect(),
    };
    let groups = vec![
        group("torso_front", &["torso_front"], &[]),
        group("head", &["head"], &[]),
        group("rostrum", &["rostrum"], &[]),
        group("torso_rear", &["torso_rear"], &[]),
        group("peduncle", &["peduncle"], &[]),
        group("fluke", &["fluke"], &[]),
        group("dorsal", &["dorsal"], &[]),
        group("pectorals", &["pectoral_r", "pectoral_l"], &["pectoral_l"]),
    ];
    let rig = RigSpec {
        joints,
        groups,
        part_of_vertex: part,
        skin_weights: weights,
        landmarks: Landmarks {
            rostrum_tip: 0,
            fluke_notch: nv - 1,
        },
    };
    let mesh = ObjMesh {
        vertices: tube.vertices,
        uv,
        faces: tube.faces,
    };
    (mesh, rig)
}

/// Two-part tube with 10 rings of 10 vertices (102 vertices, 200 faces),
/// one group per part.
pub fn toy_tube() -> (ObjMesh, RigSpec) {
    let (rings, around) = (10, 10);
    let mut tube = Tube::new(
        rings,
        around,
        |s| 0.02 + 0.12 * (PI * s).sin(),
        |s| 0.02 + 0.09 * (PI * s).sin(),
    );
    tube.center();
    let uv = tube.uv();
    let nv = tube.vertices.len();
    let part: Vec<usize> = tube.s.iter().map(|&s| usize::from(s >= 0.5)).collect();
    let weights = tube
        .s
        .iter()
        .map(|&s| {
            let w = (0.5 + (s - 0.5) / 0.3).clamp(0.0, 1.0);
            [(0, 1.0 - w), (1, w)]
                .into_iter()
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let pos = part_means(&tube.vertices, &part, 2);
    let rig = RigSpec {
        joints: vec![
            JointSpec {
                name: "front".into(),
                parent: None,
                rest_position: pos[0],
            },
            JointSpec {
                name: "back".into(),
                parent: Some("front".into()),
                rest_position: pos[1],
            },
        ],
        groups: vec![
            GroupSpec {
                name: "front".into(),
                joints: vec!["front".into()],
                mirrored: vec![],
            },
            GroupSpec {
                name: "back".into(),
                joints: vec!["back".into()],
                mirrored: vec![],
            },
        ],
        part_of_vertex: part,
        skin_weights: weights,
        landmarks: Landmarks {
            rostrum_tip: 0,
            fluke_notch: nv - 1,
        },
    };
    let mesh = ObjMesh {
        vertices: tube.vertices,
        uv,
        faces: tube.faces,
    };
    (mesh, rig)
}

fn part_means(vertices: &[[f64; 3]], part: &[usize], n: usize) -> Vec<[f64; 3]> {
    let mut acc = vec![[0.0; 3]; n];
    let mut count = vec![0usize; n];
    for (v, &p) in vertices.iter().zip(part) {
        for k in 0..3 {
            acc[p][k] += v[k];
        }
        count[p] += 1;
    }
    acc.iter()
        .zip(&count)
        .map(|(a, &c)| a.map(|x| x / c.max(1) as f64))
        .collect()
}

/// Loaded reference dolphin.
pub fn reference_template() -> Result<TemplateModel, BodyError> {
    let (mesh, rig) = reference_dolphin();
    TemplateModel::from_assets(mesh, rig)
}

/// Loaded two-part toy tube.
pub fn toy_template() -> Result<TemplateModel, BodyError> {
    let (mesh, rig) = toy_tube();
    TemplateModel::from_assets(mesh, rig)
}

/// Sagittal mirror partner of every vertex of a [`reference_dolphin`] or
/// [`toy_tube`] mesh with `around` vertices per ring.
pub fn mirror_map(num_vertices: usize, around: usize) -> Vec<usize> {
    (0..num_vertices)
        .map(|v| {
            if v == 0 || v == num_vertices - 1 {
                v
            } else {
                let (i, j) = ((v - 1) / around, (v - 1) % around);
                1 + i * around + mirror_index(j, around)
            }
        })
        .collect()
}

/// Vertices per ring of the reference dolphin.
pub const DOLPHIN_AROUND: usize = 20;
