//! Edge-collapse simplification ranked by summed plane quadrics, with
//! midpoint placement.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::format;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use super::{face_normal_raw, Mesh};
use crate::diag::{Code, Diagnostic};
use crate::geom::Vec3;

/// Weight of the constraint planes raised along open edges.
const BOUNDARY_WEIGHT: f64 = 1e3;
/// Triangles thinner than this (relative to squared edge length) count
/// as degenerate after a collapse.
const SLIVER: f64 = 1e-12;

/// Symmetric 4×4 form, upper triangle row-major.
#[derive(Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn plane(n: Vec3, d: f64, w: f64) -> Quadric {
        let p = [n.x, n.y, n.z, d];
        let mut q = [0.0; 10];
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                q[k] = w * p[i] * p[j];
                k += 1;
            }
        }
        Quadric(q)
    }

    fn add(&mut self, o: &Quadric) {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a += b;
        }
    }

    fn eval(&self, v: Vec3) -> f64 {
        let p = [v.x, v.y, v.z, 1.0];
        let mut s = 0.0;
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                let m = if i == j { 1.0 } else { 2.0 };
                s += m * self.0[k] * p[i] * p[j];
                k += 1;
            }
        }
        s
    }
}

#[derive(PartialEq)]
struct Candidate {
    cost: f64,
    a: usize,
    b: usize,
    stamp: (u32, u32),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.cost.total_cmp(&o.cost).then(self.a.cmp(&o.a)).then(self.b.cmp(&o.b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Work<'m> {
    src: &'m Mesh,
    pos: Vec<Vec3>,
    uv: Option<Vec<[f64; 2]>>,
    color: Option<Vec<Vec3>>,
    quadric: Vec<Quadric>,
    version: Vec<u32>,
    alive_v: Vec<bool>,
    faces: Vec<[usize; 3]>,
    alive_f: Vec<bool>,
    /// Live faces around each vertex.
    star: Vec<Vec<usize>>,
    live_faces: usize,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl<'m> Work<'m> {
    fn new(m: &'m Mesh) -> Work<'m> {
        let n = m.vertices.len();
        let faces: Vec<[usize; 3]> = m.triangles.iter().map(|t| t.map(|i| i as usize)).collect();
        let mut star = alloc::vec![Vec::new(); n];
        for (f, t) in faces.iter().enumerate() {
            for &v in t {
                star[v].push(f);
            }
        }
        let mut w = Work {
            src: m,
            pos: m.vertices.clone(),
            uv: m.uvs.clone(),
            color: m.colors.clone(),
            quadric: alloc::vec![Quadric::default(); n],
            version: alloc::vec![0; n],
            alive_v: alloc::vec![true; n],
            live_faces: faces.len(),
            alive_f: alloc::vec![true; faces.len()],
            faces,
            star,
            heap: BinaryHeap::new(),
        };
        w.seed_quadrics();
        for (&(a, b), _) in &m.edge_faces() {
            w.push(a as usize, b as usize);
        }
        w
    }

    fn seed_quadrics(&mut self) {
        let edges = self.src.edge_faces();
        for t in &self.faces {
            let [a, b, c] = t.map(|i| self.pos[i]);
            let Some(n) = face_normal_raw(a, b, c).normalized() else { continue };
            let q = Quadric::plane(n, -n.dot(a), 1.0);
            for &v in t {
                self.quadric[v].add(&q);
            }
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                if edges[&(u.min(v) as u32, u.max(v) as u32)] != 1 {
                    continue;
                }
                let Some(side) = (self.pos[v] - self.pos[u]).cross(n).normalized() else { continue };
                let q = Quadric::plane(side, -side.dot(self.pos[u]), BOUNDARY_WEIGHT);
                self.quadric[u].add(&q);
                self.quadric[v].add(&q);
            }
        }
    }

    fn push(&mut self, a: usize, b: usize) {
        let (a, b) = (a.min(b), a.max(b));
        let mut q = self.quadric[a];
        q.add(&self.quadric[b]);
        let mid = (self.pos[a] + self.pos[b]) * 0.5;
        let cost = q.eval(mid).max(0.0);
        self.heap.push(Reverse(Candidate { cost, a, b, stamp: (self.version[a], self.version[b]) }));
    }

    fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.star[v].iter().flat_map(|&f| self.faces[f]).filter(|&w| w != v).collect()
    }

    fn shared_faces(&self, a: usize, b: usize) -> Vec<usize> {
        self.star[a].iter().copied().filter(|&f| self.faces[f].contains(&b)).collect()
    }

    fn is_boundary_vertex(&self, v: usize) -> bool {
        self.neighbors(v).into_iter().any(|w| self.shared_faces(v, w).len() == 1)
    }

    /// Topological and geometric checks for collapsing `b` into `a` at `p`.
    fn legal(&self, a: usize, b: usize, p: Vec3) -> bool {
        let shared = self.shared_faces(a, b);
        if shared.is_empty() {
            return false;
        }
        // Link condition: the only common neighbours are the apexes of
        // the triangles on the edge.
        let apex: BTreeSet<usize> =
            shared.iter().flat_map(|&f| self.faces[f]).filter(|&w| w != a && w != b).collect();
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        if na.intersection(&nb).copied().collect::<BTreeSet<_>>() != apex {
            return false;
        }
        // An interior edge joining two boundary loops would pinch.
        if shared.len() == 2 && self.is_boundary_vertex(a) && self.is_boundary_vertex(b) {
            return false;
        }
        // A closed tetrahedron cannot shrink further without degenerating.
        if shared.len() == 2 && na.len() <= 3 && nb.len() <= 3 {
            return false;
        }
        for v in [a, b] {
            for &f in &self.star[v] {
                if shared.contains(&f) {
                    continue;
                }
                let t = self.faces[f];
                let old = t.map(|i| self.pos[i]);
                let new = t.map(|i| if i == a || i == b { p } else { self.pos[i] });
                let n_old = face_normal_raw(old[0], old[1], old[2]);
                let n_new = face_normal_raw(new[0], new[1], new[2]);
                let scale = (new[1] - new[0]).length_squared().max((new[2] - new[0]).length_squared());
                if n_new.length() <= SLIVER * scale.max(f64::MIN_POSITIVE) || n_old.dot(n_new) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: usize, b: usize, p: Vec3) {
        for f in self.shared_faces(a, b) {
            self.alive_f[f] = false;
            self.live_faces -= 1;
            for v in self.faces[f] {
                self.star[v].retain(|&g| g != f);
            }
        }
        let moved = core::mem::take(&mut self.star[b]);
        for &f in &moved {
            for i in self.faces[f].iter_mut() {
                if *i == b {
                    *i = a;
                }
            }
        }
        self.star[a].extend(moved);
        self.pos[a] = p;
        if let Some(uv) = self.uv.as_mut() {
            uv[a] = [(uv[a][0] + uv[b][0]) * 0.5, (uv[a][1] + uv[b][1]) * 0.5];
        }
        if let Some(c) = self.color.as_mut() {
            c[a] = (c[a] + c[b]) * 0.5;
        }
        let qb = self.quadric[b];
        self.quadric[a].add(&qb);
        self.alive_v[b] = false;
        self.version[a] += 1;
        self.version[b] += 1;
        for w in self.neighbors(a) {
            self.push(a, w);
        }
    }

    fn run(&mut self, target: usize) {
        while self.live_faces > target {
            let Some(Reverse(c)) = self.heap.pop() else { break };
            let (a, b) = (c.a, c.b);
            if !self.alive_v[a] || !self.alive_v[b] || c.stamp != (self.version[a], self.version[b]) {
                continue;
            }
            let p = (self.pos[a] + self.pos[b]) * 0.5;
            if self.legal(a, b, p) {
                self.collapse(a, b, p);
            }
        }
    }

    fn finish(self) -> Mesh {
        let mut remap = alloc::vec![u32::MAX; self.pos.len()];
        let mut out = Mesh::default();
        let mut uvs = self.uv.as_ref().map(|_| Vec::new());
        let mut colors = self.color.as_ref().map(|_| Vec::new());
        for (f, t) in self.faces.iter().enumerate() {
            if !self.alive_f[f] {
                continue;
            }
            let tri = t.map(|v| {
                if remap[v] == u32::MAX {
                    remap[v] = out.vertices.len() as u32;
                    out.vertices.push(self.pos[v]);
                    if let (Some(dst), Some(src)) = (uvs.as_mut(), self.uv.as_ref()) {
                        dst.push(src[v]);
                    }
                    if let (Some(dst), Some(src)) = (colors.as_mut(), self.color.as_ref()) {
                        dst.push(src[v]);
                    }
                }
                remap[v]
            });
            out.triangles.push(tri);
        }
        out.uvs = uvs;
        out.colors = colors;
        out.recompute_normals();
        out
    }
}

/// Collapses edges, cheapest first, until at most
/// `ceil(ratio · triangles)` remain or no legal collapse is left.
pub fn decimate_mesh(m: &Mesh, ratio: f64) -> Result<Mesh, Diagnostic> {
    m.validate()?;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Diagnostic::new(Code::E103, format!("decimation ratio {ratio} is outside (0, 1]")));
    }
    if ratio == 1.0 {
        return Ok(m.clone());
    }
    let target = libm::ceil(ratio * m.triangles.len() as f64) as usize;
    let mut w = Work::new(m);
    w.run(target);
    Ok(w.finish())
}

#[cfg(test)]
mod tests {
    use super::super::{grid, icosphere};
    use super::*;

    #[test]
    fn identity_ratio() {
        let s = icosphere(1);
        assert_eq!(decimate_mesh(&s, 1.0).unwrap(), s);
        assert_eq!(decimate_mesh(&s, 0.0).unwrap_err().code, Code::E103);
    }

    #[test]
    fn planar_grid_halves_on_plane() {
        let out = decimate_mesh(&grid(10, 1.0), 0.5).unwrap();
        assert!(out.triangle_count() <= 100, "{}", out.triangle_count());
        assert!(out.vertices.iter().all(|v| v.z.abs() <= 1e-6));
        out.validate().unwrap();
    }

    #[test]
    fn sphere_keeps_genus() {
        let out = decimate_mesh(&icosphere(2), 0.25).unwrap();
        assert!(out.triangle_count() <= 80, "{}", out.triangle_count());
        assert_eq!(out.euler_characteristic(), 2);
        out.validate().unwrap();
    }
}
