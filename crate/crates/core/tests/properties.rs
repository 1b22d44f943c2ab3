mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use recit_core::binding::{apply_bindings, parse_bindings, Expr};
use recit_core::data::{group_rows, Dataset, DatasetView};
use recit_core::geom::Transform;
use recit_core::registry::{RegistryEntry, SceneRegistry};
use recit_core::story::{parse_scene_spec, serialize_scene_spec, ObjectType, SceneSpec, StoryManifest, StoryPack};
use recit_core::{Code, Ray, Vec3};

use oracles::*;

fn parse(v: &serde_json::Value) -> SceneSpec {
    let bytes = serde_json::to_vec(v).unwrap();
    parse_scene_spec(&bytes, "scene.json").unwrap_or_else(|d| panic!("{d:?}\n{v:#}"))
}

fn entry(b: &BoxItem) -> RegistryEntry {
    let c = b.center();
    let h: [f64; 3] = std::array::from_fn(|k| (b.hi[k] - b.lo[k]) / 2.0);
    RegistryEntry {
        object_id: b.id.clone(),
        scene_id: "s".into(),
        object_type: ObjectType::Marker,
        transform: Transform::at(Vec3::new(c[0], c[1], c[2])),
        half_extents: Vec3::new(h[0], h[1], h[2]),
        tags: BTreeSet::new(),
        visible: b.visible,
        attributes: BTreeMap::new(),
        interactions: BTreeMap::new(),
        binding_refs: Vec::new(),
    }
}

/// Rebuilds the box list from what the registry actually stores so the
/// oracle sees bit-identical bounds.
fn mirror(reg: &SceneRegistry) -> Vec<BoxItem> {
    reg.entries()
        .map(|e| {
            let b = e.world_bounds();
            BoxItem {
                id: e.object_id.clone(),
                lo: [b.min.x, b.min.y, b.min.z],
                hi: [b.max.x, b.max.y, b.max.z],
                visible: e.visible,
            }
        })
        .collect()
}

fn numbers_table(rng: &mut rand_chacha::ChaCha8Rng) -> Arc<Dataset> {
    let header = vec!["k".to_string(), "x".to_string(), "y".to_string(), "tag".to_string()];
    let rows = (0..rng.random_range(1..40))
        .map(|i| {
            // Row 0 is never null so both measure columns type as numbers.
            let cell = |rng: &mut rand_chacha::ChaCha8Rng| {
                if i > 0 && rng.random_bool(0.1) {
                    String::new()
                } else {
                    rng.random_range(-20..20).to_string()
                }
            };
            vec![format!("r{i}"), cell(rng), cell(rng), ["a", "b", "c", ""][rng.random_range(0..4)].to_string()]
        })
        .collect();
    Arc::new(Dataset::from_records("t", header, rows).unwrap())
}

fn rows_of(v: &DatasetView) -> BTreeSet<usize> {
    v.row_indices().iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scene_document_round_trips(seed: u64) {
        let mut r = rng(seed);
        let scenes = vec!["a".to_string(), "b".to_string()];
        let doc = scene_doc(&mut r, "a", &scenes);
        let first = parse(&doc);
        let text = serialize_scene_spec(&first);
        let second = parse_scene_spec(text.as_bytes(), "scene.json").unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(text, serialize_scene_spec(&second));
    }

    #[test]
    fn reachable_set_matches_bfs(seed: u64) {
        let mut r = rng(seed);
        let story = random_story(&mut r, 12);
        let specs: Vec<SceneSpec> = story.scenes.iter().map(parse).collect();
        let pack = StoryPack::from_scenes(StoryManifest::minimal("g", &story.initial), specs);
        let (graph, warnings) = pack.compile().unwrap_or_else(|d| panic!("{d:?}"));
        let expected = bfs_unreachable(&story.initial, &story.edges);
        let all: BTreeSet<String> = story.edges.keys().cloned().collect();
        let reachable: BTreeSet<String> = all.difference(&expected).cloned().collect();
        prop_assert_eq!(graph.reachable(), reachable);
        let flagged: BTreeSet<String> = warnings
            .iter()
            .filter(|d| d.code == Code::W101)
            .map(|d| d.file.trim_start_matches("scenes/").trim_end_matches(".json").to_string())
            .collect();
        prop_assert_eq!(flagged, expected);
    }

    #[test]
    fn spatial_queries_match_brute_force(seed: u64) {
        let mut r = rng(seed);
        let mut reg = SceneRegistry::new("s", r.random_range(0.5..8.0));
        for b in random_boxes(&mut r, 60) {
            reg.register(entry(&b)).unwrap();
        }
        let boxes = mirror(&reg);
        for _ in 0..40 {
            let o: [f64; 3] = std::array::from_fn(|_| r.random_range(-30.0..30.0));
            let d = unit(&mut r);
            let ray = Ray::new(Vec3::new(o[0], o[1], o[2]), Vec3::new(d[0], d[1], d[2])).unwrap();
            let max = r.random_range(1.0..80.0);
            prop_assert_eq!(reg.ray_pick(&ray, max), brute_pick(&boxes, o, d, max));
            let rad = r.random_range(0.0..15.0);
            prop_assert_eq!(reg.query_radius(Vec3::new(o[0], o[1], o[2]), rad), brute_radius(&boxes, o, rad));
        }
    }

    #[test]
    fn index_stays_consistent_under_edits(seed: u64) {
        let mut r = rng(seed);
        let mut reg = SceneRegistry::new("s", 2.0);
        let boxes = random_boxes(&mut r, 30);
        for b in &boxes {
            reg.register(entry(b)).unwrap();
        }
        for _ in 0..100 {
            let id = &boxes[r.random_range(0..boxes.len())].id;
            if r.random_bool(0.6) {
                let mut t = reg.get(id).unwrap().transform;
                t.position = Vec3::new(r.random_range(-40.0..40.0), r.random_range(-40.0..40.0), r.random_range(-5.0..5.0));
                if r.random_bool(0.3) {
                    t.scale = Vec3::splat(r.random_range(0.1..4.0));
                }
                reg.update_transform(id, t).unwrap();
            } else {
                reg.set_visible(id, r.random()).unwrap();
            }
            let (grid, cells) = reg.index();
            let (grid2, cells2) = reg.rebuilt_index();
            prop_assert_eq!(grid, &grid2);
            prop_assert_eq!(cells, &cells2);
        }
        let mirrored = mirror(&reg);
        let c = [0.0, 0.0, 0.0];
        prop_assert_eq!(reg.query_radius(Vec3::ZERO, 25.0), brute_radius(&mirrored, c, 25.0));
    }

    #[test]
    fn expressions_match_reference(seed: u64) {
        let mut r = rng(seed);
        let tree = random_expr(&mut r, 4);
        let src = expr_source(&tree);
        let parsed = Expr::parse(&src).unwrap_or_else(|d| panic!("{src}: {d:?}"));
        prop_assert_eq!(Expr::parse(&parsed.to_string()).unwrap(), parsed.clone());
        for _ in 0..8 {
            let row = random_row(&mut r);
            let lookup = |name: &str| {
                let i: usize = name[1..].parse().unwrap();
                row[i].ok_or_else(|| recit_core::Diagnostic::new(Code::E404, "null"))
            };
            match (parsed.eval_with(&lookup), ref_eval(&tree, &row)) {
                (Ok(a), Ok(b)) => prop_assert!(close(a, b), "{src}: {a} vs {b}"),
                (Err(d), Err(code)) => prop_assert_eq!(d.code.as_str(), code, "{}", src),
                (got, want) => prop_assert!(false, "{src}: {got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn conjunction_narrows_and_nests(seed: u64) {
        let mut r = rng(seed);
        let view = DatasetView::full(numbers_table(&mut r));
        let (a, b) = (r.random_range(-20..20), r.random_range(-20..20));
        let p = format!("x > {a}");
        let q = format!("y <= {b} || tag == \"a\"");
        let fp = view.filter_str(&p).unwrap();
        let both = view.filter_str(&format!("{p} && ({q})")).unwrap();
        let either = view.filter_str(&format!("{p} || ({q})")).unwrap();
        prop_assert!(rows_of(&both).is_subset(&rows_of(&fp)));
        prop_assert!(rows_of(&fp).is_subset(&rows_of(&either)));
        prop_assert_eq!(rows_of(&fp.filter_str(&q).unwrap()), rows_of(&both));
        // Brute force over the raw cells.
        let ds = view.dataset().clone();
        let expect: BTreeSet<usize> = (0..ds.row_count())
            .filter(|&i| ds.row(i).unwrap().get("x").and_then(|v| v.as_number()).is_some_and(|x| x > a as f64))
            .collect();
        prop_assert_eq!(rows_of(&fp), expect);
    }

    #[test]
    fn complementary_filters_and_groups_partition(seed: u64) {
        let mut r = rng(seed);
        let view = DatasetView::full(numbers_table(&mut r));
        let c = r.random_range(-20..20);
        let lo = rows_of(&view.filter_str(&format!("x < {c}")).unwrap());
        let hi = rows_of(&view.filter_str(&format!("x >= {c}")).unwrap());
        let nulls: BTreeSet<usize> = view.rows().filter(|row| row.get("x").unwrap().is_null()).map(|row| row.index).collect();
        prop_assert!(lo.is_disjoint(&hi));
        let union: BTreeSet<usize> = lo.union(&hi).chain(nulls.iter()).copied().collect();
        prop_assert_eq!(union, rows_of(&view));
        let g = group_rows(&view, &["tag", "y"]).unwrap();
        let mut seen = Vec::new();
        for leaf in g.leaves() {
            seen.extend(leaf.rows.iter().copied());
        }
        let distinct: BTreeSet<usize> = seen.iter().copied().collect();
        prop_assert_eq!(seen.len(), distinct.len());
        prop_assert_eq!(distinct, rows_of(&view));
    }

    #[test]
    fn applying_bindings_twice_changes_nothing(seed: u64) {
        let mut r = rng(seed);
        let ds = numbers_table(&mut r);
        let mut reg = SceneRegistry::new("s", 2.0);
        let mut defs = Vec::new();
        for (i, b) in random_boxes(&mut r, 5).iter().enumerate() {
            let mut e = entry(b);
            e.attributes.insert("k".into(), recit_core::story::AttrValue::String(format!("r{}", r.random_range(0..40))));
            reg.register(e).unwrap();
            let path = ["transform.scale.y", "transform.position.x", "attributes.height"][r.random_range(0..3)];
            let selector = if r.random_bool(0.5) {
                serde_json::json!({"kind": "by_key", "column": "k", "attribute": "k"})
            } else {
                serde_json::json!({"kind": "by_index", "index": r.random_range(0..45)})
            };
            defs.push(serde_json::json!({
                "binding_id": format!("bind{i}"),
                "dataset_id": "t",
                "row_selector": selector,
                "target": {"object_id": b.id, "attribute_path": path},
                "expr": "scale($x, -20, 20, 0.5, 2)"
            }));
        }
        let bindings = parse_bindings(&serde_json::to_vec(&defs).unwrap(), "bindings.json").unwrap();
        let views = BTreeMap::from([("t".to_string(), DatasetView::full(ds))]);
        let (_, diags_first) = apply_bindings(&bindings, &views, &mut reg);
        let after_first = reg.clone();
        let (changes, diags_second) = apply_bindings(&bindings, &views, &mut reg);
        prop_assert!(changes.is_empty(), "{changes:?}");
        prop_assert_eq!(reg, after_first);
        prop_assert_eq!(diags_first, diags_second);
    }
}
