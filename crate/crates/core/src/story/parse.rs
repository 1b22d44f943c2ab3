use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{Map, Value as Json};

use super::*;
use crate::binding::RowSelector;
use crate::data::ColumnTag;
use crate::diag::{Code, Diagnostic};
use crate::doc::{join, Doc, Reader};

/// Parses one scene document. Every structural problem is reported.
pub fn parse_scene_spec(bytes: &[u8], file: &str) -> Result<SceneSpec, Vec<Diagnostic>> {
    let doc = Doc::parse(bytes).map_err(|d| alloc::vec![d.in_file(file)])?;
    let mut r = Reader::new(file);
    let spec = scene(&mut r, &doc);
    match spec {
        Some(s) if r.diags.is_empty() => Ok(s),
        _ => Err(r.diags),
    }
}

fn scene(r: &mut Reader, doc: &Doc) -> Option<SceneSpec> {
    r.object(doc, "")?;
    let scene_id = r.ident(doc, "", "scene_id");
    let objects = r.list(doc, "", "objects", true, object);
    let narrative_sequence = r.list(doc, "", "narrative_sequence", true, event);
    let cell_size = match r.opt(doc, "", "cell_size") {
        None => None,
        Some(v) => match r.number(v, "cell_size") {
            Some(n) if n > 0.0 && n.is_finite() => Some(n),
            Some(n) => {
                r.report(Code::E103, "cell_size", format!("cell_size must be positive, found {n}"));
                None
            }
            None => None,
        },
    };
    Some(SceneSpec { scene_id: scene_id?, objects, narrative_sequence, cell_size })
}

fn object(r: &mut Reader, doc: &Doc, path: &str) -> Option<SceneObjectSpec> {
    r.object(doc, path)?;
    let object_id = r.ident(doc, path, "object_id");
    let object_type = r.ident(doc, path, "type").and_then(|t| {
        let parsed = ObjectType::parse(&t);
        if parsed.is_none() {
            r.report(Code::E103, &join(path, "type"), format!("unknown object type `{t}`"));
        }
        parsed
    });
    let position = r.req(doc, path, "position").and_then(|v| r.vec3(v, &join(path, "position")));
    let orientation = match r.opt(doc, path, "orientation") {
        None => Some(Quat::IDENTITY),
        Some(v) => {
            let p = join(path, "orientation");
            r.quat(v, &p).and_then(|q| {
                if q.is_unit(ORIENTATION_TOLERANCE) {
                    Some(q)
                } else {
                    r.report(Code::E103, &p, format!("orientation norm {} is not 1", q.norm()));
                    None
                }
            })
        }
    };
    let mut attributes = BTreeMap::new();
    if let Some(v) = r.opt(doc, path, "attributes") {
        let p = join(path, "attributes");
        if let Some(fields) = r.object(v, &p) {
            for (k, v) in fields {
                let value = match v {
                    Doc::Bool(b) => AttrValue::Boolean(*b),
                    Doc::Number(n) => AttrValue::Number(*n),
                    Doc::String(s) => AttrValue::String(s.clone()),
                    other => {
                        r.wrong_type(&join(&p, k), "number, string or boolean", other);
                        continue;
                    }
                };
                attributes.insert(k.clone(), value);
            }
        }
    }
    let mut interactions = BTreeMap::new();
    if let Some(v) = r.opt(doc, path, "interactions") {
        let p = join(path, "interactions");
        if let Some(fields) = r.object(v, &p) {
            for (k, v) in fields {
                let kp = join(&p, k);
                let Some(kind) = TriggerKind::parse(k) else {
                    r.report(Code::E104, &kp, format!("unknown trigger kind `{k}`"));
                    continue;
                };
                if let Some(id) = r.string(v, &kp) {
                    interactions.insert(kind, id);
                }
            }
        }
    }
    Some(SceneObjectSpec {
        object_id: object_id?,
        object_type: object_type?,
        position: position?,
        orientation: orientation?,
        attributes,
        interactions,
    })
}

fn event(r: &mut Reader, doc: &Doc, path: &str) -> Option<NarrativeEventSpec> {
    r.object(doc, path)?;
    let event_id = r.ident(doc, path, "event_id");
    let trigger = r.req(doc, path, "trigger").and_then(|v| trigger(r, v, &join(path, "trigger")));
    let action = r.req(doc, path, "action").and_then(|v| action(r, v, &join(path, "action"), 1));
    let next_scene = r.opt_string(doc, path, "next_scene");
    let repeat = match r.opt(doc, path, "repeat") {
        None => Some(false),
        Some(v) => r.boolean(v, &join(path, "repeat")),
    };
    Some(NarrativeEventSpec { event_id: event_id?, trigger: trigger?, action: action?, next_scene, repeat: repeat? })
}

fn trigger(r: &mut Reader, doc: &Doc, path: &str) -> Option<TriggerSpec> {
    let (name, obj) = match doc {
        Doc::String(s) => (s.clone(), None),
        Doc::Object(_) => {
            r.object(doc, path)?;
            (r.ident(doc, path, "kind")?, Some(doc))
        }
        other => {
            r.wrong_type(path, "string or object", other);
            return None;
        }
    };
    let kind_path = if obj.is_some() { join(path, "kind") } else { path.to_string() };
    let Some(kind) = TriggerKind::parse(&name) else {
        r.report(Code::E104, &kind_path, format!("unknown trigger kind `{name}`"));
        return None;
    };
    let empty = Doc::Object(Vec::new());
    let o = obj.unwrap_or(&empty);
    let uint = |r: &mut Reader, key: &str, required: bool| -> Option<Option<u64>> {
        match r.field_value(o, path, key, required) {
            Err(()) => None,
            Ok(None) => Some(None),
            Ok(Some(v)) => r.uint(v, &join(path, key)).map(Some),
        }
    };
    let trigger = match kind {
        TriggerKind::OnGaze => Trigger::OnGaze { dwell_ms: uint(r, "dwell_ms", false)?.unwrap_or(0) },
        TriggerKind::OnGestureSelect => Trigger::OnGestureSelect,
        TriggerKind::OnProximity => {
            let v = r.field_value(o, path, "radius_m", true).ok().flatten()?;
            let p = join(path, "radius_m");
            let n = r.number(v, &p)?;
            if !(n > 0.0 && n.is_finite()) {
                r.report(Code::E103, &p, format!("radius_m must be positive, found {n}"));
                return None;
            }
            Trigger::OnProximity { radius_m: n }
        }
        TriggerKind::OnSceneEnter => Trigger::OnSceneEnter,
        TriggerKind::OnTimer => Trigger::OnTimer { delay_ms: uint(r, "delay_ms", true)?? },
        TriggerKind::OnNarrationEnd => Trigger::OnNarrationEnd { narration_id: r.opt_string(o, path, "narration_id") },
        TriggerKind::OnVoice => {
            let command = r.ident(o, path, "command")?;
            Trigger::OnVoice { command }
        }
    };
    let target = r.opt_string(o, path, "target");
    let tp = join(path, "target");
    if kind.requires_target() && target.is_none() {
        r.report(Code::E102, &tp, format!("`{name}` requires a target"));
        return None;
    }
    if kind.forbids_target() && target.is_some() {
        r.report(Code::E103, &tp, format!("`{name}` does not take a target"));
        return None;
    }
    Some(TriggerSpec { kind: trigger, target })
}

const ACTION_KINDS: [&str; 9] = [
    "reveal",
    "hide",
    "move",
    "play_animation",
    "show_data_card",
    "play_narration",
    "transition",
    "set_filter",
    "composite",
];

fn action(r: &mut Reader, doc: &Doc, path: &str, depth: usize) -> Option<ActionSpec> {
    if let Doc::String(s) = doc {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        if !ACTION_KINDS.contains(&name) {
            r.report(Code::E104, path, format!("unknown action kind `{name}`"));
            return None;
        }
        let arg = arg.filter(|a| !a.is_empty()).map(String::from);
        let build: Option<fn(String) -> ActionSpec> = match name {
            "reveal" => Some(|object_id| ActionSpec::Reveal { object_id }),
            "hide" => Some(|object_id| ActionSpec::Hide { object_id }),
            "play_narration" => Some(|narration_id| ActionSpec::PlayNarration { narration_id }),
            "transition" => Some(|scene_id| ActionSpec::Transition { scene_id }),
            _ => None,
        };
        return match (build, arg) {
            (Some(f), Some(a)) => Some(f(a)),
            (Some(_), None) => {
                r.report(Code::E102, path, format!("`{name}` needs an argument (`{name}:<id>`)"));
                None
            }
            (None, _) => {
                r.report(Code::E103, path, format!("`{name}` must be written in object form"));
                None
            }
        };
    }
    r.object(doc, path)?;
    let kind_path = join(path, "kind");
    let name = r.ident(doc, path, "kind")?;
    if !ACTION_KINDS.contains(&name.as_str()) {
        r.report(Code::E104, &kind_path, format!("unknown action kind `{name}`"));
        return None;
    }
    let a = match name.as_str() {
        "reveal" => ActionSpec::Reveal { object_id: r.ident(doc, path, "object_id")? },
        "hide" => ActionSpec::Hide { object_id: r.ident(doc, path, "object_id")? },
        "move" => {
            let object_id = r.ident(doc, path, "object_id");
            let to = r.req(doc, path, "to").and_then(|v| r.vec3(v, &join(path, "to")));
            let duration_ms = match r.opt(doc, path, "duration_ms") {
                None => Some(0),
                Some(v) => r.uint(v, &join(path, "duration_ms")),
            };
            ActionSpec::Move { object_id: object_id?, to: to?, duration_ms: duration_ms? }
        }
        "play_animation" => {
            let object_id = r.ident(doc, path, "object_id");
            let clip_id = r.ident(doc, path, "clip_id");
            ActionSpec::PlayAnimation { object_id: object_id?, clip_id: clip_id? }
        }
        "show_data_card" => {
            let anchor = r.ident(doc, path, "anchor_object_id");
            let template = r.ident(doc, path, "template_id");
            let selector = r.req(doc, path, "row_selector").and_then(|v| row_selector(r, v, &join(path, "row_selector")));
            ActionSpec::ShowDataCard { anchor_object_id: anchor?, template_id: template?, row_selector: selector? }
        }
        "play_narration" => ActionSpec::PlayNarration { narration_id: r.ident(doc, path, "narration_id")? },
        "transition" => ActionSpec::Transition { scene_id: r.ident(doc, path, "scene_id")? },
        "set_filter" => {
            let dataset_id = r.ident(doc, path, "dataset_id");
            let predicate = r.req(doc, path, "predicate").and_then(|v| r.string(v, &join(path, "predicate")));
            ActionSpec::SetFilter { dataset_id: dataset_id?, predicate: predicate? }
        }
        _ => {
            if depth > MAX_COMPOSITE_DEPTH {
                r.report(Code::E103, path, format!("composite nesting exceeds {MAX_COMPOSITE_DEPTH}"));
                return None;
            }
            let before = r.diags.len();
            let actions = r.list(doc, path, "actions", true, |r, d, p| action(r, d, p, depth + 1));
            if r.diags.len() > before {
                return None;
            }
            ActionSpec::Composite { actions }
        }
    };
    Some(a)
}

pub(crate) fn row_selector(r: &mut Reader, doc: &Doc, path: &str) -> Option<RowSelector> {
    r.object(doc, path)?;
    let kind = r.ident(doc, path, "kind")?;
    match kind.as_str() {
        "by_key" => {
            let column = r.ident(doc, path, "column");
            let attribute = r.ident(doc, path, "attribute");
            Some(RowSelector::ByKey { column: column?, attribute: attribute? })
        }
        "by_index" => {
            let v = r.req(doc, path, "index")?;
            Some(RowSelector::ByIndex { index: r.uint(v, &join(path, "index"))? as usize })
        }
        "first_of_filter" => {
            let v = r.req(doc, path, "predicate")?;
            Some(RowSelector::FirstOfFilter { predicate: r.string(v, &join(path, "predicate"))? })
        }
        other => {
            r.report(Code::E104, &join(path, "kind"), format!("unknown row selector kind `{other}`"));
            None
        }
    }
}

impl Reader {
    /// `Ok(None)` when an optional field is absent, `Err` after reporting a
    /// missing required one.
    fn field_value<'d>(&mut self, obj: &'d Doc, path: &str, key: &str, required: bool) -> Result<Option<&'d Doc>, ()> {
        match (self.opt(obj, path, key), required) {
            (Some(v), _) => Ok(Some(v)),
            (None, false) => Ok(None),
            (None, true) => {
                self.req(obj, path, key);
                Err(())
            }
        }
    }
}

fn num(n: f64) -> Json {
    serde_json::Number::from_f64(n).map_or(Json::Null, Json::Number)
}

fn vec3_json(v: Vec3) -> Json {
    let mut m = Map::new();
    m.insert("x".into(), num(v.x));
    m.insert("y".into(), num(v.y));
    m.insert("z".into(), num(v.z));
    Json::Object(m)
}

pub(crate) fn selector_json(s: &RowSelector) -> Json {
    let mut m = Map::new();
    match s {
        RowSelector::ByKey { column, attribute } => {
            m.insert("kind".into(), "by_key".into());
            m.insert("column".into(), column.as_str().into());
            m.insert("attribute".into(), attribute.as_str().into());
        }
        RowSelector::ByIndex { index } => {
            m.insert("kind".into(), "by_index".into());
            m.insert("index".into(), (*index as u64).into());
        }
        RowSelector::FirstOfFilter { predicate } => {
            m.insert("kind".into(), "first_of_filter".into());
            m.insert("predicate".into(), predicate.as_str().into());
        }
    }
    Json::Object(m)
}

fn trigger_json(t: &TriggerSpec) -> Json {
    let mut m = Map::new();
    m.insert("kind".into(), t.kind.kind().as_str().into());
    match &t.kind {
        Trigger::OnGaze { dwell_ms } => {
            m.insert("dwell_ms".into(), (*dwell_ms).into());
        }
        Trigger::OnProximity { radius_m } => {
            m.insert("radius_m".into(), num(*radius_m));
        }
        Trigger::OnTimer { delay_ms } => {
            m.insert("delay_ms".into(), (*delay_ms).into());
        }
        Trigger::OnNarrationEnd { narration_id: Some(n) } => {
            m.insert("narration_id".into(), n.as_str().into());
        }
        Trigger::OnVoice { command } => {
            m.insert("command".into(), command.as_str().into());
        }
        _ => {}
    }
    if let Some(target) = &t.target {
        m.insert("target".into(), target.as_str().into());
    }
    Json::Object(m)
}

pub fn action_json(a: &ActionSpec) -> Json {
    let mut m = Map::new();
    m.insert("kind".into(), a.kind_name().into());
    let mut s = |k: &str, v: &str| {
        m.insert(k.into(), v.into());
    };
    match a {
        ActionSpec::Reveal { object_id } | ActionSpec::Hide { object_id } => s("object_id", object_id),
        ActionSpec::Move { object_id, to, duration_ms } => {
            s("object_id", object_id);
            m.insert("to".into(), vec3_json(*to));
            m.insert("duration_ms".into(), (*duration_ms).into());
        }
        ActionSpec::PlayAnimation { object_id, clip_id } => {
            s("object_id", object_id);
            s("clip_id", clip_id);
        }
        ActionSpec::ShowDataCard { anchor_object_id, template_id, row_selector } => {
            s("anchor_object_id", anchor_object_id);
            s("template_id", template_id);
            m.insert("row_selector".into(), selector_json(row_selector));
        }
        ActionSpec::PlayNarration { narration_id } => s("narration_id", narration_id),
        ActionSpec::Transition { scene_id } => s("scene_id", scene_id),
        ActionSpec::SetFilter { dataset_id, predicate } => {
            s("dataset_id", dataset_id);
            s("predicate", predicate);
        }
        ActionSpec::Composite { actions } => {
            m.insert("actions".into(), actions.iter().map(action_json).collect());
        }
    }
    Json::Object(m)
}

/// The scene in document form (object-form triggers and actions).
pub fn scene_to_json(s: &SceneSpec) -> Json {
    let objects: Vec<Json> = s
        .objects
        .iter()
        .map(|o| {
            let mut m = Map::new();
            m.insert("object_id".into(), o.object_id.as_str().into());
            m.insert("type".into(), o.object_type.as_str().into());
            m.insert("position".into(), vec3_json(o.position));
            if o.orientation != Quat::IDENTITY {
                let q = o.orientation;
                let mut qm = Map::new();
                for (k, v) in [("x", q.x), ("y", q.y), ("z", q.z), ("w", q.w)] {
                    qm.insert(k.into(), num(v));
                }
                m.insert("orientation".into(), Json::Object(qm));
            }
            m.insert("attributes".into(), o.attributes.iter().map(|(k, v)| (k.clone(), v.to_json())).collect());
            m.insert(
                "interactions".into(),
                o.interactions.iter().map(|(k, v)| (k.as_str().to_string(), Json::from(v.as_str()))).collect(),
            );
            Json::Object(m)
        })
        .collect();
    let events: Vec<Json> = s
        .narrative_sequence
        .iter()
        .map(|e| {
            let mut m = Map::new();
            m.insert("event_id".into(), e.event_id.as_str().into());
            m.insert("trigger".into(), trigger_json(&e.trigger));
            m.insert("action".into(), action_json(&e.action));
            m.insert("next_scene".into(), e.next_scene.as_deref().map_or(Json::Null, Json::from));
            if e.repeat {
                m.insert("repeat".into(), true.into());
            }
            Json::Object(m)
        })
        .collect();
    let mut m = Map::new();
    m.insert("scene_id".into(), s.scene_id.as_str().into());
    if let Some(cs) = s.cell_size {
        m.insert("cell_size".into(), num(cs));
    }
    m.insert("objects".into(), Json::Array(objects));
    m.insert("narrative_sequence".into(), Json::Array(events));
    Json::Object(m)
}

pub fn serialize_scene_spec(s: &SceneSpec) -> String {
    serde_json::to_string_pretty(&scene_to_json(s)).expect("scene JSON is always serializable")
}

/// Parses `story.json`.
pub fn parse_manifest(bytes: &[u8], file: &str) -> Result<StoryManifest, Vec<Diagnostic>> {
    let doc = Doc::parse(bytes).map_err(|d| alloc::vec![d.in_file(file)])?;
    let mut r = Reader::new(file);
    let m = manifest(&mut r, &doc);
    match m {
        Some(m) if r.diags.is_empty() => Ok(m),
        _ => Err(r.diags),
    }
}

fn manifest(r: &mut Reader, doc: &Doc) -> Option<StoryManifest> {
    r.object(doc, "")?;
    let story_id = r.ident(doc, "", "story_id");
    let title = r.opt_string(doc, "", "title").unwrap_or_default();
    let format_version = match r.opt(doc, "", "format_version") {
        None => Some(1),
        Some(v) => r.uint(v, "format_version").and_then(|n| {
            if n == 1 {
                Some(n)
            } else {
                r.report(Code::E103, "format_version", format!("unsupported format_version {n}"));
                None
            }
        }),
    };
    let initial_scene = r.ident(doc, "", "initial_scene");
    let strings = |r: &mut Reader, key: &str, required: bool| {
        r.list(doc, "", key, required, |r, d, p| r.string(d, p))
    };
    let scenes = strings(r, "scenes", true);
    let datasets = r.list(doc, "", "datasets", false, dataset_ref);
    let bindings = strings(r, "bindings", false);
    let cards = strings(r, "cards", false);
    let narrations = strings(r, "narrations", false);
    let meshes = strings(r, "meshes", false);
    let mode_default = match r.opt_string(doc, "", "mode_default").as_deref() {
        None | Some("exploration") => Some(Mode::Exploration),
        Some("auto_narrative") => Some(Mode::AutoNarrative),
        Some(other) => {
            r.report(Code::E103, "mode_default", format!("unknown mode `{other}`"));
            None
        }
    };
    let tts = match r.opt(doc, "", "tts") {
        None => TtsConfig::default(),
        Some(v) => {
            r.object(v, "tts");
            TtsConfig {
                endpoint: r.opt_string(v, "tts", "endpoint"),
                model: r.opt_string(v, "tts", "model"),
                voice: r.opt_string(v, "tts", "voice"),
            }
        }
    };
    Some(StoryManifest {
        story_id: story_id?,
        title,
        format_version: format_version?,
        initial_scene: initial_scene?,
        scenes,
        datasets,
        bindings,
        cards,
        narrations,
        meshes,
        mode_default: mode_default?,
        tts,
    })
}

/// A dataset entry: a bare path (id = file stem) or
/// `{"id", "path", "tags": {column: [tag, ...]}}`.
fn dataset_ref(r: &mut Reader, doc: &Doc, path: &str) -> Option<DatasetRef> {
    if let Doc::String(p) = doc {
        return Some(DatasetRef { dataset_id: file_stem(p).into(), path: p.clone(), tags: BTreeMap::new() });
    }
    r.object(doc, path)?;
    let file = r.ident(doc, path, "path")?;
    let dataset_id = r.opt_string(doc, path, "id").unwrap_or_else(|| file_stem(&file).into());
    let mut tags = BTreeMap::new();
    if let Some(v) = r.opt(doc, path, "tags") {
        let tp = join(path, "tags");
        for (col, list) in r.object(v, &tp).unwrap_or_default() {
            let cp = join(&tp, col);
            let mut set = BTreeSet::new();
            for (i, t) in r.array(list, &cp).unwrap_or_default().iter().enumerate() {
                let ip = crate::doc::index(&cp, i);
                let Some(name) = r.string(t, &ip) else { continue };
                match ColumnTag::parse(&name) {
                    Some(tag) => {
                        set.insert(tag);
                    }
                    None => r.report(Code::E103, &ip, format!("unknown column tag `{name}`")),
                }
            }
            tags.insert(col.clone(), set);
        }
    }
    Some(DatasetRef { dataset_id, path: file, tags })
}

pub(crate) fn file_stem(path: &str) -> &str {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.split_once('.').map_or(name, |(stem, _)| stem)
}
