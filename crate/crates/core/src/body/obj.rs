//! Minimal Wavefront OBJ reading and writing for indexed triangle meshes with
//! one texture coordinate per vertex.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::BodyError;

/// Indexed triangle mesh as stored on disk.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjMesh {
    pub vertices: Vec<[f64; 3]>,
    pub uv: Vec<[f64; 2]>,
    pub faces: Vec<[u32; 3]>,
}

fn parse_index(tok: &str, len: usize, line: usize) -> Result<usize, BodyError> {
    let i: i64 = tok
        .parse()
        .map_err(|_| BodyError::Malformed(format!("line {line}: bad index `{tok}`")))?;
    let resolved = if i > 0 { i - 1 } else { len as i64 + i };
    if i == 0 || resolved < 0 {
        return Err(BodyError::Malformed(format!(
            "line {line}: bad index `{tok}`"
        )));
    }
    Ok(resolved as usize)
}

fn parse_floats<const N: usize>(parts: &[&str], line: usize) -> Result<[f64; N], BodyError> {
    if parts.len() < N {
        return Err(BodyError::Malformed(format!(
            "line {line}: expected {N} numbers"
        )));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .parse()
            .map_err(|_| BodyError::Malformed(format!("line {line}: bad number `{p}`")))?;
    }
    Ok(out)
}

/// Parses OBJ text. Polygons are fan-triangulated; every vertex must carry
/// exactly one texture coordinate.
pub fn parse_obj(text: &str) -> Result<ObjMesh, BodyError> {
    let mut vertices = Vec::new();
    let mut tex = Vec::new();
    let mut faces = Vec::new();
    let mut uv_of: HashMap<usize, usize> = HashMap::new();

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut parts = content.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        match tag {
            "v" => vertices.push(parse_floats::<3>(&rest, line)?),
            "vt" => tex.push(parse_floats::<2>(&rest, line)?),
            "f" => {
                if rest.len() < 3 {
                    return Err(BodyError::Malformed(format!(
                        "line {line}: face with < 3 corners"
                    )));
                }
                let mut corners = Vec::with_capacity(rest.len());
                for c in &rest {
                    let mut it = c.split('/');
                    let vi = parse_index(it.next().unwrap_or(""), vertices.len(), line)?;
                    if vi >= vertices.len() {
                        return Err(BodyError::Malformed(format!(
                            "line {line}: vertex index out of range"
                        )));
                    }
                    if let Some(t) = it.next().filter(|t| !t.is_empty()) {
                        let ti = parse_index(t, tex.len(), line)?;
                        if ti >= tex.len() {
                            return Err(BodyError::Malformed(format!(
                                "line {line}: uv index out of range"
                            )));
                        }
                        if let Some(&prev) = uv_of.get(&vi) {
                            if prev != ti && tex[prev] != tex[ti] {
                                return Err(BodyError::Malformed(format!(
                                    "line {line}: vertex {} has more than one texture coordinate",
                                    vi + 1
                                )));
                            }
                        }
                        uv_of.insert(vi, ti);
                    }
                    corners.push(vi as u32);
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }

    let mut uv = Vec::with_capacity(vertices.len());
    for i in 0..vertices.len() {
        match uv_of.get(&i) {
            Some(&t) => uv.push(tex[t]),
            None => {
                return Err(BodyError::Malformed(format!(
                    "vertex {} has no texture coordinate",
                    i + 1
                )))
            }
        }
    }
    Ok(ObjMesh {
        vertices,
        uv,
        faces,
    })
}

/// Writes OBJ text with `v`, optional `vt` (same index as the vertex), and `f`.
pub fn write_obj(vertices: &[[f64; 3]], uv: Option<&[[f64; 2]]>, faces: &[[u32; 3]]) -> String {
    let mut s = String::with_capacity(vertices.len() * 48 + faces.len() * 24);
    for v in vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    if let Some(uv) = uv {
        for t in uv {
            let _ = writeln!(s, "vt {} {}", t[0], t[1]);
        }
    }
    for f in faces {
        let [a, b, c] = f.map(|i| i + 1);
        if uv.is_some() {
            let _ = writeln!(s, "f {a}/{a} {b}/{b} {c}/{c}");
        } else {
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}
