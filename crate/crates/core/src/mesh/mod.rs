//! Triangle meshes: validation, primitives, quadric decimation, LOD
//! chains and per-vertex light baking.

mod bake;
mod decimate;
mod primitives;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use bake::{bake_vertex_lighting, DirectionalLight};
pub use decimate::decimate_mesh;
pub use primitives::{grid, icosphere, terrain};

use crate::diag::{Code, Diagnostic};
use crate::geom::Vec3;

pub const NORMAL_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    /// Per-vertex unit normals; empty when the source had none.
    pub normals: Vec<Vec3>,
    pub uvs: Option<Vec<[f64; 2]>>,
    /// Per-vertex RGB in `[0, 1]`.
    pub colors: Option<Vec<Vec3>>,
    pub triangles: Vec<[u32; 3]>,
}

fn face_normal_raw(a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    (b - a).cross(c - a)
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Mesh {
        let mut m = Mesh { vertices, normals: Vec::new(), uvs: None, colors: None, triangles };
        m.recompute_normals();
        m
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    fn corners(&self, t: [u32; 3]) -> [Vec3; 3] {
        t.map(|i| self.vertices[i as usize])
    }

    /// Area-weighted vertex normals. Vertices with no area get +z.
    pub fn recompute_normals(&mut self) {
        let mut acc = alloc::vec![Vec3::ZERO; self.vertices.len()];
        for &t in &self.triangles {
            let [a, b, c] = self.corners(t);
            let n = face_normal_raw(a, b, c);
            for i in t {
                acc[i as usize] = acc[i as usize] + n;
            }
        }
        self.normals = acc.into_iter().map(|n| n.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0))).collect();
    }

    /// Triangle count per undirected edge.
    pub fn edge_faces(&self) -> BTreeMap<(u32, u32), usize> {
        let mut m = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Checks index ranges, degenerate triangles, attribute lengths, unit
    /// normals, and that no edge has more than two triangles.
    pub fn validate(&self) -> Result<(), Diagnostic> {
        if self.triangles.is_empty() || self.vertices.is_empty() {
            return Err(Diagnostic::new(Code::E605, "mesh has no triangles"));
        }
        let n = self.vertices.len();
        let bad = |msg: alloc::string::String| Err(Diagnostic::new(Code::E604, msg));
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v as usize >= n) {
                return bad(format!("triangle {i} indexes past {n} vertices"));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return bad(format!("triangle {i} repeats a vertex"));
            }
        }
        if !self.normals.is_empty() {
            if self.normals.len() != n {
                return bad(format!("{} normals for {n} vertices", self.normals.len()));
            }
            if let Some(i) = self.normals.iter().position(|v| (v.length() - 1.0).abs() > NORMAL_TOLERANCE) {
                return bad(format!("normal {i} is not unit length"));
            }
        }
        if self.uvs.as_ref().is_some_and(|u| u.len() != n) || self.colors.as_ref().is_some_and(|c| c.len() != n) {
            return bad(format!("per-vertex attributes do not match {n} vertices"));
        }
        if let Some(((a, b), k)) = self.edge_faces().into_iter().find(|(_, k)| *k > 2) {
            return bad(format!("edge {a}-{b} is shared by {k} triangles"));
        }
        Ok(())
    }

    /// `V − E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = alloc::vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_faces().len() as i64 + self.triangles.len() as i64
    }
}

pub const LOD_RATIOS: [f64; 4] = [1.0, 0.5, 0.25, 0.1];
/// Lower distance bounds of levels 1..3, in meters.
pub const LOD_THRESHOLDS: [f64; 3] = [2.0, 5.0, 12.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodChain {
    pub levels: Vec<Mesh>,
}

pub fn build_lod_chain(m: &Mesh) -> Result<LodChain, Diagnostic> {
    let levels = LOD_RATIOS.iter().map(|&r| decimate_mesh(m, r)).collect::<Result<_, _>>()?;
    Ok(LodChain { levels })
}

impl LodChain {
    pub fn select(&self, distance_m: f64) -> &Mesh {
        &self.levels[select_lod(distance_m).min(self.levels.len() - 1)]
    }
}

/// Level for a viewer distance; each boundary belongs to the farther
/// level. Negative or NaN distances select level 0.
pub fn select_lod(distance_m: f64) -> usize {
    LOD_THRESHOLDS.iter().filter(|&&t| distance_m >= t).count()
}
