use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::Mesh;
use crate::geom::Vec3;

/// `n × n` quads (two triangles each) spanning `[0, n·spacing]²` in the
/// z = 0 plane, facing +z, with uvs in `[0, 1]²`.
pub fn grid(n: u32, spacing: f64) -> Mesh {
    terrain(n, spacing, |_, _| 0.0)
}

/// A grid displaced along z by `height(x, y)`.
pub fn terrain(n: u32, spacing: f64, height: impl Fn(f64, f64) -> f64) -> Mesh {
    let side = n + 1;
    let mut vertices = Vec::with_capacity((side * side) as usize);
    let mut uvs = Vec::with_capacity(vertices.capacity());
    for j in 0..side {
        for i in 0..side {
            let (x, y) = (i as f64 * spacing, j as f64 * spacing);
            vertices.push(Vec3::new(x, y, height(x, y)));
            uvs.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity((2 * n * n) as usize);
    for j in 0..n {
        for i in 0..n {
            let a = j * side + i;
            let (b, c, d) = (a + 1, a + side, a + side + 1);
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }
    }
    let mut m = Mesh::new(vertices, triangles);
    m.uvs = Some(uvs);
    m
}

/// Unit icosphere: an icosahedron split `subdivisions` times
/// (20 · 4ⁿ triangles, outward winding).
pub fn icosphere(subdivisions: u32) -> Mesh {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let mut vertices: Vec<Vec3> =
        raw.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalized().expect("nonzero")).collect();
    let mut faces: Vec<[u32; 3]> = alloc::vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut midpoint = |a: u32, b: u32, vs: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let p = (vs[a as usize] + vs[b as usize]).normalized().expect("nonzero");
                vs.push(p);
                (vs.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces)
}
