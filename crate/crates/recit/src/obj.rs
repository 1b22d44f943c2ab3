//! Wavefront OBJ subset: `v` (optionally with RGB), `vn`, `vt`, `f`.
//!
//! Vertices are keyed by position index. A position's normal and uv come
//! from the first face corner that names one.

use std::fmt::Write;

use recit_core::mesh::Mesh;
use recit_core::{Code, Diagnostic, Vec3};

fn bad(line: usize, msg: impl std::fmt::Display) -> Diagnostic {
    Diagnostic::new(Code::E103, format!("line {line}: {msg}"))
}

fn floats(line: usize, parts: &[&str]) -> Result<Vec<f64>, Diagnostic> {
    parts
        .iter()
        .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(line, format!("bad number `{s}`"))))
        .collect()
}

fn resolve(line: usize, raw: &str, len: usize) -> Result<usize, Diagnostic> {
    let i: i64 = raw.parse().map_err(|_| bad(line, format!("bad index `{raw}`")))?;
    let idx = if i < 0 { len as i64 + i } else { i - 1 };
    if idx < 0 || idx as usize >= len {
        return Err(bad(line, format!("index {i} out of range")));
    }
    Ok(idx as usize)
}

pub fn read_obj(text: &str) -> Result<Mesh, Diagnostic> {
    let mut pos = Vec::new();
    let mut colors = Vec::new();
    let mut normals_in = Vec::new();
    let mut uvs_in = Vec::new();
    let mut tris = Vec::new();
    let mut vn: Vec<Option<usize>> = Vec::new();
    let mut vt: Vec<Option<usize>> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let mut parts = raw.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        match tag {
            "v" => {
                let f = floats(line, &rest)?;
                match f.len() {
                    3 | 4 => {}
                    6 => colors.push(Vec3::new(f[3], f[4], f[5])),
                    _ => return Err(bad(line, "vertex needs 3 or 6 numbers")),
                }
                pos.push(Vec3::new(f[0], f[1], f[2]));
                vn.push(None);
                vt.push(None);
            }
            "vn" => {
                let f = floats(line, &rest)?;
                if f.len() != 3 {
                    return Err(bad(line, "normal needs 3 numbers"));
                }
                normals_in.push(Vec3::new(f[0], f[1], f[2]));
            }
            "vt" => {
                let f = floats(line, &rest)?;
                if f.len() < 2 {
                    return Err(bad(line, "texture coordinate needs 2 numbers"));
                }
                uvs_in.push([f[0], f[1]]);
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(bad(line, "face needs at least 3 corners"));
                }
                let mut corners = Vec::with_capacity(rest.len());
                for c in &rest {
                    let mut it = c.split('/');
                    let v = resolve(line, it.next().unwrap_or(""), pos.len())?;
                    if let Some(t) = it.next().filter(|s| !s.is_empty()) {
                        let t = resolve(line, t, uvs_in.len())?;
                        vt[v].get_or_insert(t);
                    }
                    if let Some(nm) = it.next().filter(|s| !s.is_empty()) {
                        let nm = resolve(line, nm, normals_in.len())?;
                        vn[v].get_or_insert(nm);
                    }
                    corners.push(v as u32);
                }
                for k in 1..corners.len() - 1 {
                    tris.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let has_colors = !colors.is_empty();
    if has_colors && colors.len() != pos.len() {
        return Err(bad(0, "vertex colors must be given for every vertex or none"));
    }
    let normals = if vn.iter().any(Option::is_some) {
        vn.iter().map(|i| i.map_or(Vec3::ZERO, |i| normals_in[i])).collect()
    } else {
        Vec::new()
    };
    let uvs = vt.iter().any(Option::is_some).then(|| vt.iter().map(|i| i.map_or([0.0, 0.0], |i| uvs_in[i])).collect());
    Ok(Mesh { vertices: pos, normals, uvs, colors: has_colors.then_some(colors), triangles: tris })
}

pub fn write_obj(m: &Mesh) -> String {
    let mut s = String::new();
    for (i, v) in m.vertices.iter().enumerate() {
        match &m.colors {
            Some(c) => writeln!(s, "v {} {} {} {} {} {}", v.x, v.y, v.z, c[i].x, c[i].y, c[i].z),
            None => writeln!(s, "v {} {} {}", v.x, v.y, v.z),
        }
        .unwrap();
    }
    for uv in m.uvs.iter().flatten() {
        writeln!(s, "vt {} {}", uv[0], uv[1]).unwrap();
    }
    for n in &m.normals {
        writeln!(s, "vn {} {} {}", n.x, n.y, n.z).unwrap();
    }
    let has_n = !m.normals.is_empty();
    let has_t = m.uvs.is_some();
    for t in &m.triangles {
        s.push('f');
        for &i in t {
            let i = i + 1;
            match (has_t, has_n) {
                (true, true) => write!(s, " {i}/{i}/{i}"),
                (true, false) => write!(s, " {i}/{i}"),
                (false, true) => write!(s, " {i}//{i}"),
                (false, false) => write!(s, " {i}"),
            }
            .unwrap();
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use recit_core::mesh::{grid, icosphere};

    #[test]
    fn round_trip_exact() {
        let mut g = grid(3, 0.5);
        g.colors = Some(vec![Vec3::splat(0.25); g.vertices.len()]);
        assert_eq!(read_obj(&write_obj(&g)).unwrap(), g);
        let s = icosphere(1);
        assert_eq!(read_obj(&write_obj(&s)).unwrap(), s);
    }

    #[test]
    fn quads_fan_and_negative_indices() {
        let m = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n").unwrap();
        assert_eq!(m.triangles, [[0, 1, 2], [0, 2, 3]]);
        assert!(m.normals.is_empty());
        assert!(read_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }
}
