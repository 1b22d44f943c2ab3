//! Random generators and brute-force reference implementations shared by
//! the property tests and the acceptance runner. Nothing here calls into
//! the engine's own algorithms.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- scenes

const TYPES: [&str; 5] = ["marker", "model", "terrain", "card_anchor", "light"];
const TRIGGERS: [&str; 7] =
    ["on_gaze", "on_gesture_select", "on_proximity", "on_scene_enter", "on_timer", "on_narration_end", "on_voice"];

fn ident(rng: &mut ChaCha8Rng, prefix: &str) -> String {
    format!("{prefix}{}", rng.random_range(0..40))
}

fn coord(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-10..10) as f64,
        1 => rng.random_range(-100.0..100.0),
        2 => rng.random_range(-1.0..1.0) * 1e-3,
        _ => (rng.random_range(-1000..1000) as f64) / 8.0,
    }
}

fn vec3(rng: &mut ChaCha8Rng) -> Value {
    json!({"x": coord(rng), "y": coord(rng), "z": coord(rng)})
}

fn unit_quat(rng: &mut ChaCha8Rng) -> Value {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 {
            return json!({"x": q[0] / n, "y": q[1] / n, "z": q[2] / n, "w": q[3] / n});
        }
    }
}

fn attr_value(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..3) {
        0 => Value::Bool(rng.random()),
        1 => json!(coord(rng)),
        _ => Value::String(["Moscow", "Wilna", "", "ünï côdé", "a \"quoted\" \\ value", "1.5"][rng.random_range(0..6)].into()),
    }
}

fn trigger(rng: &mut ChaCha8Rng, objects: &[String]) -> Value {
    let kind = *TRIGGERS.choose(rng).unwrap();
    let target = || objects.first().cloned().unwrap_or_else(|| "ghost".into());
    let mut m = Map::new();
    m.insert("kind".into(), kind.into());
    match kind {
        "on_gaze" => {
            if rng.random_bool(0.5) {
                m.insert("dwell_ms".into(), rng.random_range(0..5000u64).into());
            }
        }
        "on_proximity" => {
            m.insert("radius_m".into(), json!(rng.random_range(0.01..20.0)));
        }
        "on_timer" => {
            m.insert("delay_ms".into(), rng.random_range(0..60_000u64).into());
        }
        "on_narration_end" if rng.random_bool(0.5) => {
            m.insert("narration_id".into(), ident(rng, "n").into());
        }
        "on_voice" => {
            m.insert("command".into(), ["next", "go back", "show me moscow"][rng.random_range(0..3)].into());
        }
        _ => {}
    }
    let optional_target = matches!(kind, "on_voice" | "on_narration_end") && rng.random_bool(0.3);
    if matches!(kind, "on_gaze" | "on_gesture_select" | "on_proximity") || optional_target {
        let t = objects.choose(rng).cloned().unwrap_or_else(target);
        m.insert("target".into(), t.into());
    }
    let bare = m.len() == 1 && !matches!(kind, "on_gaze" | "on_gesture_select" | "on_proximity");
    if bare && rng.random_bool(0.5) {
        Value::String(kind.into())
    } else {
        Value::Object(m)
    }
}

fn row_selector(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..3) {
        0 => json!({"kind": "by_key", "column": "city", "attribute": "city"}),
        1 => json!({"kind": "by_index", "index": rng.random_range(0..30u64)}),
        _ => json!({"kind": "first_of_filter", "predicate": "troops > 1000"}),
    }
}

pub fn action(rng: &mut ChaCha8Rng, depth: usize, objects: &[String], scenes: &[String]) -> Value {
    let obj = |rng: &mut ChaCha8Rng| objects.choose(rng).cloned().unwrap_or_else(|| "ghost".into());
    let pick = if depth >= 4 { rng.random_range(0..8) } else { rng.random_range(0..9) };
    let string_form = rng.random_bool(0.4);
    match pick {
        0 | 1 => {
            let kind = if pick == 0 { "reveal" } else { "hide" };
            let o = obj(rng);
            if string_form {
                format!("{kind}:{o}").into()
            } else {
                json!({"kind": kind, "object_id": o})
            }
        }
        2 => json!({"kind": "move", "object_id": obj(rng), "to": vec3(rng), "duration_ms": rng.random_range(0..5000u64)}),
        3 => json!({"kind": "play_animation", "object_id": obj(rng), "clip_id": ident(rng, "clip")}),
        4 => json!({"kind": "show_data_card", "anchor_object_id": obj(rng), "template_id": "card", "row_selector": row_selector(rng)}),
        5 => {
            let n = ident(rng, "n");
            if string_form {
                format!("play_narration:{n}").into()
            } else {
                json!({"kind": "play_narration", "narration_id": n})
            }
        }
        6 => {
            let s = scenes.choose(rng).cloned().unwrap_or_else(|| "elsewhere".into());
            if string_form {
                format!("transition:{s}").into()
            } else {
                json!({"kind": "transition", "scene_id": s})
            }
        }
        7 => json!({"kind": "set_filter", "dataset_id": "march", "predicate": "year > 1812 || city == \"Moscow\""}),
        _ => {
            let n = rng.random_range(0..4);
            let inner: Vec<Value> = (0..n).map(|_| action(rng, depth + 1, objects, scenes)).collect();
            json!({"kind": "composite", "actions": inner})
        }
    }
}

/// A structurally valid scene document. Cross references may dangle;
/// that is the validator's business, not the parser's.
pub fn scene_doc(rng: &mut ChaCha8Rng, scene_id: &str, scenes: &[String]) -> Value {
    let n_obj = rng.random_range(0..6);
    let mut ids: Vec<String> = Vec::new();
    while ids.len() < n_obj {
        let id = ident(rng, "obj_");
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    let n_ev = rng.random_range(0..6);
    let event_ids: Vec<String> = (0..n_ev).map(|i| format!("e{i}")).collect();
    let objects: Vec<Value> = ids
        .iter()
        .map(|id| {
            let mut o = Map::new();
            o.insert("object_id".into(), id.as_str().into());
            o.insert("type".into(), (*TYPES.choose(rng).unwrap()).into());
            o.insert("position".into(), vec3(rng));
            if rng.random_bool(0.3) {
                o.insert("orientation".into(), unit_quat(rng));
            }
            if rng.random_bool(0.7) {
                let attrs: Map<String, Value> = (0..rng.random_range(0..4)).map(|k| (format!("p{k}"), attr_value(rng))).collect();
                o.insert("attributes".into(), Value::Object(attrs));
            }
            if rng.random_bool(0.6) && !event_ids.is_empty() {
                let mut inter = Map::new();
                for t in TRIGGERS {
                    if rng.random_bool(0.3) {
                        inter.insert(t.to_string(), event_ids.choose(rng).unwrap().as_str().into());
                    }
                }
                o.insert("interactions".into(), Value::Object(inter));
            }
            Value::Object(o)
        })
        .collect();
    let events: Vec<Value> = event_ids
        .iter()
        .map(|eid| {
            let mut e = Map::new();
            e.insert("event_id".into(), eid.as_str().into());
            e.insert("trigger".into(), trigger(rng, &ids));
            e.insert("action".into(), action(rng, 1, &ids, scenes));
            if rng.random_bool(0.3) {
                let s = scenes.choose(rng).cloned().unwrap_or_else(|| scene_id.into());
                e.insert("next_scene".into(), s.into());
            }
            if rng.random_bool(0.3) {
                e.insert("repeat".into(), rng.random::<bool>().into());
            }
            Value::Object(e)
        })
        .collect();
    json!({"scene_id": scene_id, "objects": objects, "narrative_sequence": events})
}

/// The scene-graph listing from the RécitKit write-up, with its
/// placeholders filled from the fixed vocabularies.
pub const LISTING: &str = r#"{
  "scene_id": "scene_identifier",
  "objects": [
    {
      "object_id": "unique_object_id",
      "type": "marker",
      "position": { "x": 1.5,
                    "y": 0,
                    "z": -2},
      "attributes": {
        "property_1": "value"
      },
      "interactions": {
        "on_gaze": "event_identifier",
        "on_gesture_select": "event_identifier"
      }
    }
  ],
  "narrative_sequence": [
    {
      "event_id": "event_identifier",
      "trigger": "on_scene_enter",
      "action": "reveal:unique_object_id",
      "next_scene": "optional_next_scene_id"
    }
  ]
}"#;

/// Object keys at each level of a JSON document, e.g. `objects[]`.
pub fn key_shape(v: &Value, path: &str, out: &mut BTreeMap<String, BTreeSet<String>>) {
    match v {
        Value::Object(m) => {
            out.entry(path.to_string()).or_default().extend(m.keys().cloned());
            for (k, v) in m {
                // Attribute and interaction maps have open key sets.
                if k != "attributes" && k != "interactions" && k != "position" && k != "trigger" && k != "action" {
                    key_shape(v, &format!("{path}.{k}"), out);
                }
            }
        }
        Value::Array(items) => {
            for i in items {
                key_shape(i, &format!("{path}[]"), out);
            }
        }
        _ => {}
    }
}

// ---------------------------------------------------------------- graphs

pub struct RandomStory {
    pub initial: String,
    pub scenes: Vec<Value>,
    pub edges: BTreeMap<String, BTreeSet<String>>,
}

/// Up to `max_scenes` scenes wired by random `next_scene` fields and
/// (possibly nested) `transition` actions.
pub fn random_story(rng: &mut ChaCha8Rng, max_scenes: usize) -> RandomStory {
    let n = rng.random_range(1..=max_scenes);
    let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let p_edge: f64 = rng.random_range(0.05..0.3);
    let mut scenes = Vec::new();
    for id in &ids {
        let out = edges.entry(id.clone()).or_default();
        let mut events = Vec::new();
        for k in 0..rng.random_range(0..4) {
            let mut e = json!({"event_id": format!("e{k}"), "trigger": {"kind": "on_voice", "command": format!("c{k}")}});
            let mut action = json!({"kind": "composite", "actions": []});
            if rng.random_bool(p_edge) {
                let to = ids.choose(rng).unwrap().clone();
                let leaf = json!({"kind": "transition", "scene_id": to});
                action = if rng.random_bool(0.5) { leaf } else { json!({"kind": "composite", "actions": [{"kind": "composite", "actions": [leaf]}]}) };
                out.insert(to);
            }
            if rng.random_bool(p_edge) {
                let to = ids.choose(rng).unwrap().clone();
                e["next_scene"] = to.clone().into();
                out.insert(to);
            }
            e["action"] = action;
            events.push(e);
        }
        scenes.push(json!({"scene_id": id, "objects": [], "narrative_sequence": events}));
    }
    RandomStory { initial: ids.choose(rng).unwrap().clone(), scenes, edges }
}

/// Scenes not reachable from `initial` by breadth-first search.
pub fn bfs_unreachable(initial: &str, edges: &BTreeMap<String, BTreeSet<String>>) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([initial.to_string()]);
    let mut queue = VecDeque::from([initial.to_string()]);
    while let Some(s) = queue.pop_front() {
        for t in edges.get(&s).into_iter().flatten() {
            if seen.insert(t.clone()) {
                queue.push_back(t.clone());
            }
        }
    }
    edges.keys().filter(|k| !seen.contains(*k)).cloned().collect()
}

// --------------------------------------------------------------- spatial

#[derive(Debug, Clone)]
pub struct BoxItem {
    pub id: String,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub visible: bool,
}

impl BoxItem {
    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|i| (self.lo[i] + self.hi[i]) / 2.0)
    }
}

pub fn random_boxes(rng: &mut ChaCha8Rng, n: usize) -> Vec<BoxItem> {
    (0..n)
        .map(|i| {
            let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
            let h: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..2.0));
            BoxItem {
                id: format!("b{i:03}"),
                lo: std::array::from_fn(|k| c[k] - h[k]),
                hi: std::array::from_fn(|k| c[k] + h[k]),
                visible: rng.random_bool(0.9),
            }
        })
        .collect()
}

pub fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.2 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// Entry parameter of a ray into a box by interval clipping, or `None`.
fn clip(origin: [f64; 3], dir: [f64; 3], b: &BoxItem) -> Option<f64> {
    let (mut enter, mut exit) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        if dir[k] == 0.0 {
            if origin[k] < b.lo[k] || origin[k] > b.hi[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[k];
        let a = (b.lo[k] - origin[k]) * inv;
        let c = (b.hi[k] - origin[k]) * inv;
        enter = enter.max(a.min(c));
        exit = exit.min(a.max(c));
    }
    (enter <= exit).then_some(enter)
}

pub fn brute_pick(boxes: &[BoxItem], origin: [f64; 3], dir: [f64; 3], max_dist: f64) -> Option<(String, f64)> {
    let mut hits: Vec<(f64, &str)> = boxes
        .iter()
        .filter(|b| b.visible)
        .filter_map(|b| clip(origin, dir, b).filter(|t| *t <= max_dist).map(|t| (t, b.id.as_str())))
        .collect();
    hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    hits.first().map(|(t, id)| (id.to_string(), *t))
}

pub fn brute_radius(boxes: &[BoxItem], center: [f64; 3], r: f64) -> Vec<String> {
    let mut hits: Vec<(f64, &str)> = boxes
        .iter()
        .filter(|b| b.visible)
        .map(|b| {
            let c = b.center();
            (((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2) + (c[2] - center[2]).powi(2)).sqrt(), b.id.as_str())
        })
        .filter(|(d, _)| *d <= r)
        .collect();
    hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    hits.into_iter().map(|(_, id)| id.to_string()).collect()
}

// ----------------------------------------------------------- expressions

#[derive(Debug, Clone)]
pub enum RefExpr {
    Num(f64),
    Col(usize),
    Neg(Box<RefExpr>),
    Bin(char, Box<RefExpr>, Box<RefExpr>),
    Call(&'static str, Vec<RefExpr>),
}

pub const EXPR_COLUMNS: usize = 4;

pub fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> RefExpr {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.5) {
            let n = match rng.random_range(0..3) {
                0 => rng.random_range(0..20) as f64,
                1 => rng.random_range(0.0..1000.0),
                _ => (rng.random_range(-400..400) as f64) / 16.0,
            };
            RefExpr::Num(n.abs())
        } else {
            RefExpr::Col(rng.random_range(0..EXPR_COLUMNS))
        };
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_expr(rng, depth - 1));
    match rng.random_range(0..9) {
        0 => RefExpr::Neg(sub(rng)),
        1..=4 => RefExpr::Bin(['+', '-', '*', '/'][rng.random_range(0..4)], sub(rng), sub(rng)),
        5 => RefExpr::Call("scale", (0..5).map(|_| random_expr(rng, depth - 1)).collect()),
        6 => RefExpr::Call("clamp", (0..3).map(|_| random_expr(rng, depth - 1)).collect()),
        7 => RefExpr::Call("min", (0..2).map(|_| random_expr(rng, depth - 1)).collect()),
        _ => RefExpr::Call("max", (0..2).map(|_| random_expr(rng, depth - 1)).collect()),
    }
}

/// Fully parenthesised source text.
pub fn expr_source(e: &RefExpr) -> String {
    match e {
        RefExpr::Num(n) => format!("{n}"),
        RefExpr::Col(i) => format!("$c{i}"),
        RefExpr::Neg(x) => format!("-({})", expr_source(x)),
        RefExpr::Bin(op, a, b) => format!("({} {op} {})", expr_source(a), expr_source(b)),
        RefExpr::Call(f, args) => format!("{f}({})", args.iter().map(expr_source).collect::<Vec<_>>().join(", ")),
    }
}

/// Reference semantics: `Err(code)` names the diagnostic expected.
pub fn ref_eval(e: &RefExpr, row: &[Option<f64>]) -> Result<f64, &'static str> {
    Ok(match e {
        RefExpr::Num(n) => *n,
        RefExpr::Col(i) => row[*i].ok_or("E404")?,
        RefExpr::Neg(x) => -ref_eval(x, row)?,
        RefExpr::Bin(op, a, b) => {
            let x = ref_eval(a, row)?;
            let y = ref_eval(b, row)?;
            match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                _ if y == 0.0 => return Err("E405"),
                _ => x / y,
            }
        }
        RefExpr::Call(f, args) => {
            let v = args.iter().map(|a| ref_eval(a, row)).collect::<Result<Vec<_>, _>>()?;
            match *f {
                "scale" => {
                    let (x, a, b, c, d) = (v[0], v[1], v[2], v[3], v[4]);
                    if a == b {
                        return Err("E406");
                    }
                    if x == a {
                        c
                    } else if x == b {
                        d
                    } else {
                        c + (x - a) * (d - c) / (b - a)
                    }
                }
                "clamp" => {
                    let lo_applied = if v[0] < v[1] { v[1] } else { v[0] };
                    if lo_applied > v[2] {
                        v[2]
                    } else {
                        lo_applied
                    }
                }
                "min" => {
                    if v[1] < v[0] {
                        v[1]
                    } else {
                        v[0]
                    }
                }
                _ => {
                    if v[1] > v[0] {
                        v[1]
                    } else {
                        v[0]
                    }
                }
            }
        }
    })
}

pub fn random_row(rng: &mut ChaCha8Rng) -> Vec<Option<f64>> {
    (0..EXPR_COLUMNS)
        .map(|_| match rng.random_range(0..10) {
            0 => None,
            1 => Some(0.0),
            2..=5 => Some(rng.random_range(-1000.0..1000.0)),
            _ => Some(rng.random_range(-50..50) as f64),
        })
        .collect()
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) || (a.is_nan() && b.is_nan())
}
