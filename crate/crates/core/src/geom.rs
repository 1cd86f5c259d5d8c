//! Small fixed-size vector and matrix helpers over [`Real`] scalars.

use crate::autodiff::Real;

pub type V3<S> = [S; 3];
pub type M3<S> = [[S; 3]; 3];

#[inline]
pub fn lift3<S: Real>(v: [f64; 3]) -> V3<S> {
    [S::from(v[0]), S::from(v[1]), S::from(v[2])]
}

#[inline]
pub fn value3<S: Real>(v: &V3<S>) -> [f64; 3] {
    [v[0].value(), v[1].value(), v[2].value()]
}

#[inline]
pub fn add<S: Real>(a: V3<S>, b: V3<S>) -> V3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<S: Real>(a: V3<S>, b: V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<S: Real>(a: V3<S>, s: S) -> V3<S> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<S: Real>(a: V3<S>, b: V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<S: Real>(a: V3<S>, b: V3<S>) -> V3<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<S: Real>(a: V3<S>) -> S {
    dot(a, a).sqrt()
}

#[inline]
pub fn mat_vec<S: Real>(m: &M3<S>, v: V3<S>) -> V3<S> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul<S: Real>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    let mut out = [[S::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, o) in row.iter_mut().enumerate() {
            *o = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose<S: Real>(m: &M3<S>) -> M3<S> {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub fn identity<S: Real>() -> M3<S> {
    let (o, z) = (S::from(1.0), S::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn det(m: &M3<f64>) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Area-weighted, normalized per-vertex normals.
pub fn vertex_normals<S: Real>(vertices: &[V3<S>], faces: &[[u32; 3]]) -> Vec<V3<S>> {
    let mut acc = vec![[S::zero(); 3]; vertices.len()];
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let n = cross(sub(b, a), sub(c, a));
        for &i in f {
            acc[i as usize] = add(acc[i as usize], n);
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = norm(n);
            if len.value() > 0.0 {
                scale(n, S::from(1.0) / len)
            } else {
                n
            }
        })
        .collect()
}
