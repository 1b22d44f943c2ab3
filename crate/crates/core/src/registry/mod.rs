//! Live scene objects and their spatial index.
//!
//! Each scene keeps its own [`SceneRegistry`]: entries keyed by object id,
//! a uniform grid mapping cells to the ids of visible entries whose world
//! box overlaps them, a back-map from id to cells, and a tag index.
//! Every ordering is by lexicographic object id.

mod grid;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diag::{Code, Diagnostic};
use crate::geom::{Aabb, Ray, Transform, Vec3};
use crate::story::{AttrValue, ObjectType, SceneObjectSpec};

pub use grid::Cell;

pub const DEFAULT_CELL_SIZE: f64 = 0.5;
pub const DEFAULT_HALF_EXTENT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub object_id: String,
    pub scene_id: String,
    pub object_type: ObjectType,
    pub transform: Transform,
    /// Local half-extents in meters, before scale and rotation.
    pub half_extents: Vec3,
    pub tags: BTreeSet<String>,
    pub visible: bool,
    pub attributes: BTreeMap<String, AttrValue>,
    /// Trigger kind name to event id.
    pub interactions: BTreeMap<String, String>,
    pub binding_refs: Vec<String>,
}

impl RegistryEntry {
    /// Builds an entry from its scene declaration.
    ///
    /// Bounds come from `attributes.bounds_half_extents` (a number, or an
    /// `"x,y,z"` string), tags from the object type plus the
    /// comma-separated `attributes.tags`. Card anchors and objects with
    /// `attributes.visible = false` start hidden.
    pub fn from_spec(spec: &SceneObjectSpec, scene_id: &str) -> RegistryEntry {
        let half_extents = match spec.attributes.get("bounds_half_extents") {
            Some(AttrValue::Number(n)) if *n > 0.0 => Vec3::splat(*n),
            Some(AttrValue::String(s)) => parse_triple(s).unwrap_or(Vec3::splat(DEFAULT_HALF_EXTENT)),
            _ => Vec3::splat(DEFAULT_HALF_EXTENT),
        };
        let mut tags = BTreeSet::new();
        tags.insert(spec.object_type.as_str().to_string());
        if let Some(AttrValue::String(t)) = spec.attributes.get("tags") {
            tags.extend(t.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from));
        }
        let visible = match spec.attributes.get("visible") {
            Some(AttrValue::Boolean(b)) => *b,
            _ => spec.object_type != ObjectType::CardAnchor,
        };
        RegistryEntry {
            object_id: spec.object_id.clone(),
            scene_id: scene_id.to_string(),
            object_type: spec.object_type,
            transform: Transform { position: spec.position, orientation: spec.orientation, scale: Vec3::ONE },
            half_extents,
            tags,
            visible,
            attributes: spec.attributes.clone(),
            interactions: spec.interactions.iter().map(|(k, v)| (k.as_str().to_string(), v.clone())).collect(),
            binding_refs: Vec::new(),
        }
    }

    pub fn world_bounds(&self) -> Aabb {
        self.transform.world_bounds(self.half_extents)
    }
}

fn parse_triple(s: &str) -> Option<Vec3> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().ok()?;
    match v[..] {
        [x, y, z] if x > 0.0 && y > 0.0 && z > 0.0 => Some(Vec3::new(x, y, z)),
        _ => None,
    }
}

/// The objects of one scene plus their spatial and tag indexes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SceneRegistryData", from = "SceneRegistryData")]
pub struct SceneRegistry {
    scene_id: String,
    cell_size: f64,
    entries: BTreeMap<String, RegistryEntry>,
    grid: BTreeMap<Cell, BTreeSet<String>>,
    cells_of: BTreeMap<String, Vec<Cell>>,
    tag_index: BTreeMap<String, BTreeSet<String>>,
}

/// Serialized form: the entries only; indexes are rebuilt on load.
#[derive(Serialize, Deserialize)]
struct SceneRegistryData {
    scene_id: String,
    cell_size: f64,
    entries: Vec<RegistryEntry>,
}

impl From<SceneRegistry> for SceneRegistryData {
    fn from(r: SceneRegistry) -> Self {
        SceneRegistryData { scene_id: r.scene_id, cell_size: r.cell_size, entries: r.entries.into_values().collect() }
    }
}

impl From<SceneRegistryData> for SceneRegistry {
    fn from(d: SceneRegistryData) -> Self {
        let mut r = SceneRegistry::new(&d.scene_id, d.cell_size);
        for e in d.entries {
            r.insert_unchecked(e);
        }
        r
    }
}

impl SceneRegistry {
    pub fn new(scene_id: &str, cell_size: f64) -> Self {
        let cell_size = if cell_size > 0.0 && cell_size.is_finite() { cell_size } else { DEFAULT_CELL_SIZE };
        SceneRegistry {
            scene_id: scene_id.to_string(),
            cell_size,
            entries: BTreeMap::new(),
            grid: BTreeMap::new(),
            cells_of: BTreeMap::new(),
            tag_index: BTreeMap::new(),
        }
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, object_id: &str) -> Option<&RegistryEntry> {
        self.entries.get(object_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    /// Cells currently holding `object_id` (empty when hidden).
    pub fn cells_of(&self, object_id: &str) -> &[Cell] {
        self.cells_of.get(object_id).map_or(&[], Vec::as_slice)
    }

    pub fn register_object(&mut self, spec: &SceneObjectSpec) -> Result<&RegistryEntry, Diagnostic> {
        let entry = RegistryEntry::from_spec(spec, &self.scene_id);
        self.register(entry)
    }

    pub fn register(&mut self, entry: RegistryEntry) -> Result<&RegistryEntry, Diagnostic> {
        if self.entries.contains_key(&entry.object_id) {
            return Err(Diagnostic::new(
                Code::E301,
                format!("object `{}` already registered in scene `{}`", entry.object_id, self.scene_id),
            ));
        }
        let id = entry.object_id.clone();
        self.insert_unchecked(entry);
        Ok(&self.entries[&id])
    }

    fn insert_unchecked(&mut self, entry: RegistryEntry) {
        let id = entry.object_id.clone();
        for t in &entry.tags {
            self.tag_index.entry(t.clone()).or_default().insert(id.clone());
        }
        self.entries.insert(id.clone(), entry);
        self.reindex(&id);
    }

    fn unindex(&mut self, id: &str) {
        if let Some(cells) = self.cells_of.remove(id) {
            for c in cells {
                if let Some(bucket) = self.grid.get_mut(&c) {
                    bucket.remove(id);
                    if bucket.is_empty() {
                        self.grid.remove(&c);
                    }
                }
            }
        }
    }

    fn reindex(&mut self, id: &str) {
        self.unindex(id);
        let entry = &self.entries[id];
        if !entry.visible {
            return;
        }
        let cells = grid::cells_overlapping(&entry.world_bounds(), self.cell_size);
        for c in &cells {
            self.grid.entry(*c).or_default().insert(id.to_string());
        }
        self.cells_of.insert(id.to_string(), cells);
    }

    fn entry_mut(&mut self, object_id: &str) -> Result<&mut RegistryEntry, Diagnostic> {
        let scene = &self.scene_id;
        self.entries
            .get_mut(object_id)
            .ok_or_else(|| Diagnostic::new(Code::E302, format!("unknown object `{object_id}` in scene `{scene}`")))
    }

    /// Replaces the transform and moves the entry's grid cells with it.
    pub fn update_transform(&mut self, object_id: &str, transform: Transform) -> Result<&RegistryEntry, Diagnostic> {
        if !transform.scale_is_positive() {
            return Err(Diagnostic::new(Code::E103, format!("scale of `{object_id}` must be positive")));
        }
        let e = self.entry_mut(object_id)?;
        e.transform = transform;
        self.reindex(object_id);
        Ok(&self.entries[object_id])
    }

    pub fn set_visible(&mut self, object_id: &str, visible: bool) -> Result<&RegistryEntry, Diagnostic> {
        let e = self.entry_mut(object_id)?;
        e.visible = visible;
        self.reindex(object_id);
        Ok(&self.entries[object_id])
    }

    pub fn set_binding_refs(&mut self, object_id: &str, refs: Vec<String>) -> Result<(), Diagnostic> {
        self.entry_mut(object_id)?.binding_refs = refs;
        Ok(())
    }

    pub fn set_attribute(&mut self, object_id: &str, key: &str, value: AttrValue) -> Result<(), Diagnostic> {
        self.entry_mut(object_id)?.attributes.insert(key.to_string(), value);
        Ok(())
    }

    /// Nearest visible entry hit by `ray` within `max_dist`; ties go to the
    /// smaller id.
    pub fn ray_pick(&self, ray: &Ray, max_dist: f64) -> Option<(String, f64)> {
        let mut best: Option<(String, f64)> = None;
        grid::traverse(&self.grid, self.cell_size, ray, max_dist, |bucket| {
            for id in bucket {
                let Some(t) = self.entries[id].world_bounds().ray_entry(ray) else { continue };
                if t > max_dist {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((bid, bt)) => t < *bt || (t == *bt && id < bid),
                };
                if better {
                    best = Some((id.clone(), t));
                }
            }
            best.as_ref().map(|(_, t)| *t)
        });
        best
    }

    /// Visible entries whose world-box center lies within `radius` of
    /// `center`, nearest first.
    pub fn query_radius(&self, center: Vec3, radius: f64) -> Vec<String> {
        if !(radius >= 0.0) {
            return Vec::new();
        }
        let reach = Aabb::from_center_half(center, Vec3::splat(radius));
        let lo = grid::cell_of(reach.min, self.cell_size);
        let hi = grid::cell_of(reach.max, self.cell_size);
        let span = |a: i64, b: i64| (b - a + 1) as u128;
        let cell_count = span(lo.0, hi.0) * span(lo.1, hi.1) * span(lo.2, hi.2);
        let candidates: BTreeSet<&str> = if cell_count as usize > self.grid.len() {
            self.cells_of.keys().map(String::as_str).collect()
        } else {
            let mut out = BTreeSet::new();
            for x in lo.0..=hi.0 {
                for y in lo.1..=hi.1 {
                    for z in lo.2..=hi.2 {
                        if let Some(b) = self.grid.get(&(x, y, z)) {
                            out.extend(b.iter().map(String::as_str));
                        }
                    }
                }
            }
            out
        };
        let mut hits: Vec<(f64, &str)> = candidates
            .into_iter()
            .filter_map(|id| {
                let d = self.entries[id].world_bounds().center().distance(center);
                (d <= radius).then_some((d, id))
            })
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        hits.into_iter().map(|(_, id)| id.to_string()).collect()
    }

    /// All entries carrying `tag`, visible or not, sorted by id.
    pub fn query_tag(&self, tag: &str) -> Vec<String> {
        self.tag_index.get(tag).map_or_else(Vec::new, |s| s.iter().cloned().collect())
    }

    /// Grid and back-map rebuilt from scratch; equal to the incrementally
    /// maintained index when the registry is consistent.
    pub fn rebuilt_index(&self) -> (BTreeMap<Cell, BTreeSet<String>>, BTreeMap<String, Vec<Cell>>) {
        let fresh: SceneRegistry = SceneRegistryData::from(self.clone()).into();
        (fresh.grid, fresh.cells_of)
    }

    pub fn index(&self) -> (&BTreeMap<Cell, BTreeSet<String>>, &BTreeMap<String, Vec<Cell>>) {
        (&self.grid, &self.cells_of)
    }
}

/// Registries for every scene entered so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    scenes: BTreeMap<String, SceneRegistry>,
}

impl Registry {
    pub fn scene(&self, scene_id: &str) -> Option<&SceneRegistry> {
        self.scenes.get(scene_id)
    }

    pub fn scene_mut(&mut self, scene_id: &str) -> Option<&mut SceneRegistry> {
        self.scenes.get_mut(scene_id)
    }

    pub fn ensure_scene(&mut self, scene_id: &str, cell_size: f64) -> (&mut SceneRegistry, bool) {
        let created = !self.scenes.contains_key(scene_id);
        let reg = self.scenes.entry(scene_id.to_string()).or_insert_with(|| SceneRegistry::new(scene_id, cell_size));
        (reg, created)
    }

    pub fn register_object(&mut self, spec: &SceneObjectSpec, scene_id: &str) -> Result<&RegistryEntry, Diagnostic> {
        let (reg, _) = self.ensure_scene(scene_id, DEFAULT_CELL_SIZE);
        reg.register_object(spec)
    }

    pub fn update_transform(&mut self, object_id: &str, scene_id: &str, t: Transform) -> Result<&RegistryEntry, Diagnostic> {
        self.scenes
            .get_mut(scene_id)
            .ok_or_else(|| Diagnostic::new(Code::E302, format!("unknown scene `{scene_id}`")))?
            .update_transform(object_id, t)
    }

    pub fn ray_pick(&self, scene_id: &str, ray: &Ray, max_dist: f64) -> Option<(String, f64)> {
        self.scenes.get(scene_id)?.ray_pick(ray, max_dist)
    }

    pub fn query_radius(&self, scene_id: &str, center: Vec3, radius: f64) -> Vec<String> {
        self.scenes.get(scene_id).map_or_else(Vec::new, |s| s.query_radius(center, radius))
    }

    pub fn query_tag(&self, scene_id: &str, tag: &str) -> Vec<String> {
        self.scenes.get(scene_id).map_or_else(Vec::new, |s| s.query_tag(tag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Quat;

    fn marker(id: &str, at: Vec3) -> SceneObjectSpec {
        SceneObjectSpec::new(id, ObjectType::Marker, at)
    }

    #[test]
    fn default_bounds_unit_cube() {
        let mut r = Registry::default();
        let e = r.register_object(&marker("m", Vec3::ZERO), "s").unwrap();
        assert_eq!(e.world_bounds(), Aabb::new(Vec3::splat(-0.5), Vec3::splat(0.5)));
        assert!(e.visible);
        assert_eq!(r.register_object(&marker("m", Vec3::ZERO), "s").unwrap_err().code, Code::E301);
    }

    #[test]
    fn cells_cover_bounds() {
        let mut r = SceneRegistry::new("s", 0.5);
        r.register_object(&marker("m", Vec3::new(10.0, 0.0, 0.0))).unwrap();
        // x in [9.5, 10.5] -> cells 19..=21; y,z in [-0.5, 0.5] -> -1..=1
        let cells = r.cells_of("m");
        assert_eq!(cells.len(), 27);
        assert!(cells.iter().all(|c| (19..=21).contains(&c.0) && (-1..=1).contains(&c.1) && (-1..=1).contains(&c.2)));
    }

    #[test]
    fn move_updates_cells() {
        let mut r = SceneRegistry::new("s", 0.5);
        r.register_object(&marker("m", Vec3::ZERO)).unwrap();
        let before: Vec<Cell> = r.cells_of("m").to_vec();
        r.update_transform("m", Transform::at(Vec3::new(5.0, 0.0, 0.0))).unwrap();
        let (grid, _) = r.index();
        for c in &before {
            assert!(!grid.get(c).is_some_and(|b| b.contains("m")));
        }
        assert!(r.cells_of("m").iter().all(|c| (9..=11).contains(&c.0)));
        assert_eq!(r.rebuilt_index(), (r.index().0.clone(), r.index().1.clone()));
        assert_eq!(r.update_transform("zz", Transform::default()).unwrap_err().code, Code::E302);
    }

    #[test]
    fn scaling_doubles_half_extents() {
        let mut r = SceneRegistry::new("s", 0.5);
        r.register_object(&marker("m", Vec3::ZERO)).unwrap();
        let t = Transform { scale: Vec3::splat(2.0), ..Transform::default() };
        let e = r.update_transform("m", t).unwrap();
        assert_eq!(e.world_bounds().half_extents(), Vec3::ONE);
        assert!(r.cells_of("m").iter().all(|c| (-2..=2).contains(&c.0)));
        assert_eq!(r.cells_of("m").len(), 125);
    }

    #[test]
    fn picks_and_misses() {
        let mut r = SceneRegistry::new("s", 0.5);
        r.register_object(&marker("m", Vec3::ZERO)).unwrap();
        let ray = Ray::new(Vec3::new(0.0, 0.0, -5.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.ray_pick(&ray, 100.0), Some(("m".into(), 4.5)));
        assert_eq!(r.ray_pick(&ray, 4.0), None);
        let up = Ray::new(Vec3::new(0.0, 0.0, -5.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(r.ray_pick(&up, 100.0), None);
    }

    #[test]
    fn pick_ties_break_by_id() {
        let mut r = SceneRegistry::new("s", 0.5);
        r.register_object(&marker("b", Vec3::ZERO)).unwrap();
        r.register_object(&marker("a", Vec3::ZERO)).unwrap();
        let ray = Ray::new(Vec3::new(0.0, 0.0, -5.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.ray_pick(&ray, 100.0).unwrap().0, "a");
    }

    #[test]
    fn hidden_objects_skip_spatial_queries_but_keep_tags() {
        let mut r = SceneRegistry::new("s", 0.5);
        let mut spec = marker("m", Vec3::ZERO);
        spec.attributes.insert("tags".into(), AttrValue::String("moscow, city".into()));
        r.register_object(&spec).unwrap();
        r.set_visible("m", false).unwrap();
        let ray = Ray::new(Vec3::new(0.0, 0.0, -5.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.ray_pick(&ray, 100.0), None);
        assert!(r.query_radius(Vec3::ZERO, 1.0).is_empty());
        assert_eq!(r.query_tag("marker"), ["m"]);
        assert_eq!(r.query_tag("moscow"), ["m"]);
        assert!(r.query_tag("cathedral").is_empty());
    }

    #[test]
    fn card_anchors_start_hidden() {
        let mut r = SceneRegistry::new("s", 0.5);
        let e = r.register_object(&SceneObjectSpec::new("c", ObjectType::CardAnchor, Vec3::ZERO)).unwrap();
        assert!(!e.visible);
        assert!(r.cells_of("c").is_empty());
    }

    #[test]
    fn radius_uses_centers() {
        let mut r = SceneRegistry::new("s", 0.5);
        r.register_object(&marker("o", Vec3::ZERO)).unwrap();
        r.register_object(&marker("x", Vec3::new(3.0, 0.0, 0.0))).unwrap();
        assert_eq!(r.query_radius(Vec3::ZERO, 1.0), ["o"]);
        assert_eq!(r.query_radius(Vec3::ZERO, 2.9), ["o"]);
        assert_eq!(r.query_radius(Vec3::ZERO, 3.0), ["o", "x"]);
        assert_eq!(r.query_radius(Vec3::ZERO, 1e9), ["o", "x"]);
    }

    #[test]
    fn serde_rebuilds_index() {
        let mut r = SceneRegistry::new("s", 0.5);
        r.register_object(&marker("a", Vec3::ZERO)).unwrap();
        let mut spec = marker("b", Vec3::new(1.0, 2.0, 3.0));
        spec.orientation = Quat { x: 0.0, y: 0.6, z: 0.0, w: 0.8 };
        r.register_object(&spec).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: SceneRegistry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
