//! Uniform grid cell arithmetic and 3D-DDA ray traversal.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::geom::{Aabb, Ray, Vec3};

/// Integer cell coordinates `floor(p / cell_size)`.
pub type Cell = (i64, i64, i64);

pub fn cell_of(p: Vec3, cell_size: f64) -> Cell {
    let f = |v: f64| libm::floor(v / cell_size) as i64;
    (f(p.x), f(p.y), f(p.z))
}

/// Every cell the closed box touches, in lexicographic order.
pub fn cells_overlapping(b: &Aabb, cell_size: f64) -> Vec<Cell> {
    let lo = cell_of(b.min, cell_size);
    let hi = cell_of(b.max, cell_size);
    let mut out = Vec::new();
    for x in lo.0..=hi.0 {
        for y in lo.1..=hi.1 {
            for z in lo.2..=hi.2 {
                out.push((x, y, z));
            }
        }
    }
    out
}

fn axis(c: Cell, i: usize) -> i64 {
    match i {
        0 => c.0,
        1 => c.1,
        _ => c.2,
    }
}

fn set_axis(c: &mut Cell, i: usize, v: i64) {
    match i {
        0 => c.0 = v,
        1 => c.1 = v,
        _ => c.2 = v,
    }
}

/// Walks occupied-region cells along `ray` in order of entry distance.
///
/// `visit` receives each non-empty bucket and returns the best hit distance
/// found so far; traversal stops once that distance is strictly inside the
/// cells already visited.
pub fn traverse(
    grid: &BTreeMap<Cell, BTreeSet<String>>,
    cell_size: f64,
    ray: &Ray,
    max_dist: f64,
    mut visit: impl FnMut(&BTreeSet<String>) -> Option<f64>,
) {
    let Some((first, _)) = grid.first_key_value() else { return };
    let (mut lo, mut hi) = (*first, *first);
    for c in grid.keys() {
        for i in 0..3 {
            let (l, h) = (axis(lo, i).min(axis(*c, i)), axis(hi, i).max(axis(*c, i)));
            set_axis(&mut lo, i, l);
            set_axis(&mut hi, i, h);
        }
    }
    let cs = cell_size;
    let region = Aabb::new(
        Vec3::new(lo.0 as f64 * cs, lo.1 as f64 * cs, lo.2 as f64 * cs),
        Vec3::new((hi.0 + 1) as f64 * cs, (hi.1 + 1) as f64 * cs, (hi.2 + 1) as f64 * cs),
    );
    let Some(t_start) = region.ray_entry(ray) else { return };
    if t_start > max_dist {
        return;
    }
    let mut cell = cell_of(ray.at(t_start), cs);
    for i in 0..3 {
        let v = axis(cell, i).clamp(axis(lo, i), axis(hi, i));
        set_axis(&mut cell, i, v);
    }
    let step: [i64; 3] = core::array::from_fn(|i| {
        let d = ray.direction.axis(i);
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    });
    let boundary_t = |cell: Cell, i: usize| -> f64 {
        let d = ray.direction.axis(i);
        match step[i] {
            0 => f64::INFINITY,
            s => {
                let edge = if s > 0 { axis(cell, i) + 1 } else { axis(cell, i) };
                (edge as f64 * cs - ray.origin.axis(i)) / d
            }
        }
    };
    let mut best: Option<f64> = None;
    loop {
        let exits: [f64; 3] = core::array::from_fn(|i| boundary_t(cell, i));
        let t_exit = exits[0].min(exits[1]).min(exits[2]);
        if let Some(bucket) = grid.get(&cell) {
            best = visit(bucket);
        }
        let margin = 1e-9 * t_exit.abs().max(1.0);
        if best.is_some_and(|b| b < t_exit - margin) || t_exit > max_dist || !t_exit.is_finite() {
            return;
        }
        let i = (0..3).min_by(|&a, &b| exits[a].total_cmp(&exits[b])).expect("three axes");
        let next = axis(cell, i) + step[i];
        if next < axis(lo, i) || next > axis(hi, i) {
            return;
        }
        set_axis(&mut cell, i, next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_of_floors_negative() {
        assert_eq!(cell_of(Vec3::new(-0.1, 0.0, 0.49), 0.5), (-1, 0, 0));
        assert_eq!(cell_of(Vec3::new(10.5, 9.5, -0.5), 0.5), (21, 19, -1));
    }

    #[test]
    fn boundary_boxes_touch_upper_cell() {
        let b = Aabb::new(Vec3::new(9.5, 0.0, 0.0), Vec3::new(10.5, 0.0, 0.0));
        let xs: Vec<i64> = cells_overlapping(&b, 0.5).iter().map(|c| c.0).collect();
        assert_eq!(xs, [19, 20, 21]);
    }
}
