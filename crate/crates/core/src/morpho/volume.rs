use std::collections::HashMap;

use crate::body::check_closed;
use crate::geom::det;

use super::MorphoError;

/// Enclosed volume of a closed triangle mesh as the absolute sum of signed
/// tetrahedra `det(v1, v2, v3) / 6` about the origin.
pub fn mesh_volume(vertices: &[[f64; 3]], faces: &[[u32; 3]]) -> Result<f64, MorphoError> {
    check_closed(faces, vertices.len()).map_err(MorphoError::OpenMesh)?;
    let mut total = 0.0;
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        total += det(&[a, b, c]);
    }
    Ok((total / 6.0).abs())
}

/// Volume by counting the centers of an `n^3` grid over the bounding box
/// that fall inside the mesh (parity of vertical ray crossings).
pub fn voxel_volume(vertices: &[[f64; 3]], faces: &[[u32; 3]], n: usize) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let size = [0, 1, 2].map(|k| (hi[k] - lo[k]) / n as f64);
    // Nudge ray positions off exact vertex and edge coordinates.
    let jitter = [0.5 + 1.3e-7, 0.5, 0.5 + 2.9e-7];
    let center = |k: usize, i: usize| lo[k] + (i as f64 + jitter[k]) * size[k];

    // Crossing heights per (x, z) column.
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let range = |k: usize| -> Option<(usize, usize)> {
            let (mn, mx) = (a[k].min(b[k]).min(c[k]), a[k].max(b[k]).max(c[k]));
            let i0 = ((mn - lo[k]) / size[k] - jitter[k]).ceil().max(0.0);
            let i1 = ((mx - lo[k]) / size[k] - jitter[k])
                .floor()
                .min(n as f64 - 1.0);
            (i1 >= i0).then_some((i0 as usize, i1 as usize))
        };
        let (Some((x0, x1)), Some((z0, z1))) = (range(0), range(2)) else {
            continue;
        };
        let area = (b[0] - a[0]) * (c[2] - a[2]) - (c[0] - a[0]) * (b[2] - a[2]);
        if area == 0.0 {
            continue;
        }
        for ix in x0..=x1 {
            let x = center(0, ix);
            for iz in z0..=z1 {
                let z = center(2, iz);
                let w0 = ((b[0] - x) * (c[2] - z) - (c[0] - x) * (b[2] - z)) / area;
                let w1 = ((c[0] - x) * (a[2] - z) - (a[0] - x) * (c[2] - z)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                    columns[ix * n + iz].push(w0 * a[1] + w1 * b[1] + w2 * c[1]);
                }
            }
        }
    }

    let mut count = 0usize;
    for col in &mut columns {
        if col.len() < 2 {
            continue;
        }
        col.sort_by(f64::total_cmp);
        for pair in col.chunks_exact(2) {
            let first = ((pair[0] - lo[1]) / size[1] - jitter[1]).ceil().max(0.0) as i64;
            let last = ((pair[1] - lo[1]) / size[1] - jitter[1])
                .floor()
                .min(n as f64 - 1.0) as i64;
            if last >= first {
                count += (last - first + 1) as usize;
            }
        }
    }
    count as f64 * size[0] * size[1] * size[2]
}

/// Axis-aligned unit cube `[0, 1]^3`, outward-facing.
pub fn unit_cube() -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let v = (0..8)
        .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
        .collect();
    let f = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    (v, f)
}

/// Icosahedron subdivided `levels` times and projected onto the sphere.
pub fn icosphere(radius: f64, levels: usize) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut f: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let unit = |p: [f64; 3]| {
        let l = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        p.map(|c| c / l)
    };
    for p in &mut v {
        *p = unit(*p);
    }
    for _ in 0..levels {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        for tri in &f {
            let mut m = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                m[k] = *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let (pa, pb) = (v[a as usize], v[b as usize]);
                    v.push(unit([0, 1, 2].map(|i| (pa[i] + pb[i]) / 2.0)));
                    (v.len() - 1) as u32
                });
            }
            next.push([tri[0], m[0], m[2]]);
            next.push([tri[1], m[1], m[0]]);
            next.push([tri[2], m[2], m[1]]);
            next.push(m);
        }
        f = next;
    }
    (v.into_iter().map(|p| p.map(|c| c * radius)).collect(), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cube_volume_is_exact() {
        let (v, f) = unit_cube();
        assert!((mesh_volume(&v, &f).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn icosphere_is_close_to_the_ball() {
        let (v, f) = icosphere(1.0, 4);
        let vol = mesh_volume(&v, &f).unwrap();
        let ball = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((vol - ball).abs() / ball < 0.005, "{vol}");
        assert!(vol < ball);
    }

    #[test]
    fn open_mesh_is_rejected() {
        let (v, mut f) = unit_cube();
        f.pop();
        assert!(matches!(mesh_volume(&v, &f), Err(MorphoError::OpenMesh(_))));
    }

    #[test]
    fn translation_leaves_volume() {
        let (v, f) = icosphere(0.7, 2);
        let moved: Vec<[f64; 3]> = v.iter().map(|p| p.map(|c| c + 10.0)).collect();
        let (a, b) = (
            mesh_volume(&v, &f).unwrap(),
            mesh_volume(&moved, &f).unwrap(),
        );
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn voxels_agree_with_tetrahedra() {
        let (v, f) = icosphere(1.0, 3);
        let exact = mesh_volume(&v, &f).unwrap();
        let vox = voxel_volume(&v, &f, 128);
        assert!((vox - exact).abs() / exact < 0.01, "{vox} vs {exact}");
        let (v, f) = unit_cube();
        assert!((voxel_volume(&v, &f, 32) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rigid_and_scale_behaviour(
            angle in -3.0f64..3.0,
            shift in prop::array::uniform3(-5.0f64..5.0),
            s in 0.2f64..4.0,
        ) {
            let (v, f) = icosphere(1.0, 2);
            let base = mesh_volume(&v, &f).unwrap();
            let (c, sn) = (angle.cos(), angle.sin());
            let moved: Vec<[f64; 3]> = v
                .iter()
                .map(|p| [c * p[0] - sn * p[2] + shift[0], p[1] + shift[1], sn * p[0] + c * p[2] + shift[2]])
                .collect();
            prop_assert!((mesh_volume(&moved, &f).unwrap() - base).abs() / base < 1e-9);
            let scaled: Vec<[f64; 3]> = v.iter().map(|p| p.map(|x| x * s)).collect();
            let expect = s * s * s * base;
            prop_assert!((mesh_volume(&scaled, &f).unwrap() - expect).abs() / expect < 1e-9);
        }
    }
}
