use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::diag::{Code, Diagnostic};
use crate::geom::Vec3;

/// Light travelling along `direction` (from the light toward the scene).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalLight {
    pub direction: Vec3,
    pub intensity: f64,
    pub color: Vec3,
}

fn clamp01(v: Vec3) -> Vec3 {
    let c = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    Vec3::new(c(v.x), c(v.y), c(v.z))
}

/// Lambertian per-vertex lighting:
/// `clamp01(ambient + Σ intensity · color · max(0, n · −direction))`.
pub fn bake_vertex_lighting(m: &Mesh, lights: &[DirectionalLight], ambient: Vec3) -> Result<Mesh, Diagnostic> {
    if m.normals.len() != m.vertices.len() || m.vertices.is_empty() {
        return Err(Diagnostic::new(Code::E606, "mesh has no per-vertex normals"));
    }
    for (i, l) in lights.iter().enumerate() {
        if (l.direction.length() - 1.0).abs() > 1e-6 || !(l.intensity >= 0.0) {
            return Err(Diagnostic::new(
                Code::E103,
                format!("light {i} needs a unit direction and nonnegative intensity"),
            ));
        }
    }
    let colors: Vec<Vec3> = m
        .normals
        .iter()
        .map(|&n| {
            let lit = lights.iter().fold(ambient, |acc, l| {
                let lambert = n.dot(-l.direction).max(0.0);
                acc + l.color * (l.intensity * lambert)
            });
            clamp01(lit)
        })
        .collect();
    let mut out = m.clone();
    out.colors = Some(colors);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one(n: Vec3) -> Mesh {
        let mut m = Mesh::new(vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)], vec![[0, 1, 2]]);
        m.normals = vec![n; 3];
        m
    }

    fn white(direction: Vec3, intensity: f64) -> DirectionalLight {
        DirectionalLight { direction, intensity, color: Vec3::ONE }
    }

    #[test]
    fn head_on_ambient_and_clamp() {
        let m = one(Vec3::new(0.0, 0.0, 1.0));
        let c = bake_vertex_lighting(&m, &[white(Vec3::new(0.0, 0.0, -1.0), 1.0)], Vec3::ZERO).unwrap();
        assert_eq!(c.colors.unwrap()[0], Vec3::ONE);
        let c = bake_vertex_lighting(&m, &[white(Vec3::new(1.0, 0.0, 0.0), 1.0)], Vec3::splat(0.2)).unwrap();
        assert_eq!(c.colors.unwrap()[0], Vec3::splat(0.2));
        let two = [white(Vec3::new(0.0, 0.0, -1.0), 0.7), white(Vec3::new(0.0, 0.0, -1.0), 0.7)];
        assert_eq!(bake_vertex_lighting(&m, &two, Vec3::ZERO).unwrap().colors.unwrap()[2], Vec3::ONE);
        assert_eq!(bake_vertex_lighting(&m, &[], Vec3::ZERO).unwrap().colors.unwrap()[1], Vec3::ZERO);
    }

    #[test]
    fn missing_normals() {
        let mut m = one(Vec3::new(0.0, 0.0, 1.0));
        m.normals.clear();
        assert_eq!(bake_vertex_lighting(&m, &[], Vec3::ZERO).unwrap_err().code, Code::E606);
    }
}
