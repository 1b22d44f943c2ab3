use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::compile::build_graph;
use super::*;
use crate::binding::{AttributePath, RowSelector};
use crate::data::{DType, Dataset, Predicate};
use crate::diag::{Code, Diagnostic};
use crate::doc::join;
use crate::registry::RegistryEntry;

struct Out {
    diags: Vec<Diagnostic>,
}

impl Out {
    fn push(&mut self, code: Code, file: &str, path: &str, msg: String) {
        self.diags.push(Diagnostic::new(code, msg).at(file, path));
    }
}

fn event_path(i: usize) -> String {
    format!("narrative_sequence[{i}]")
}

/// Duplicate ids, the initial scene, and every scene-internal reference
/// (object, event, scene). These are the checks compilation depends on.
pub(crate) fn structural(manifest: &StoryManifest, manifest_file: &str, scenes: &[Located<SceneSpec>]) -> Vec<Diagnostic> {
    let mut out = Out { diags: Vec::new() };
    let ids: BTreeSet<&str> = scenes.iter().map(|s| s.item.scene_id.as_str()).collect();
    if !ids.contains(manifest.initial_scene.as_str()) {
        out.push(
            Code::E010,
            manifest_file,
            "initial_scene",
            format!("initial scene `{}` is not declared", manifest.initial_scene),
        );
    }
    let mut seen = BTreeSet::new();
    for Located { file, item: s, .. } in scenes {
        if !seen.insert(s.scene_id.as_str()) {
            out.push(Code::E001, file, "scene_id", format!("duplicate scene_id `{}`", s.scene_id));
        }
        let mut objs = BTreeSet::new();
        for (i, o) in s.objects.iter().enumerate() {
            if !objs.insert(o.object_id.as_str()) {
                let p = format!("objects[{i}].object_id");
                out.push(Code::E002, file, &p, format!("duplicate object_id `{}`", o.object_id));
            }
        }
        let mut evs = BTreeSet::new();
        for (i, e) in s.narrative_sequence.iter().enumerate() {
            if !evs.insert(e.event_id.as_str()) {
                let p = join(&event_path(i), "event_id");
                out.push(Code::E003, file, &p, format!("duplicate event_id `{}`", e.event_id));
            }
        }
        for (i, o) in s.objects.iter().enumerate() {
            for (kind, ev) in &o.interactions {
                if !evs.contains(ev.as_str()) {
                    let p = format!("objects[{i}].interactions.{}", kind.as_str());
                    out.push(Code::E004, file, &p, format!("interaction refers to unknown event `{ev}`"));
                }
            }
        }
        for (i, e) in s.narrative_sequence.iter().enumerate() {
            let ep = event_path(i);
            if let Some(t) = &e.trigger.target {
                if !objs.contains(t.as_str()) {
                    out.push(Code::E004, file, &format!("{ep}.trigger.target"), format!("unknown object `{t}`"));
                }
            }
            e.action.walk(&join(&ep, "action"), &mut |a, p| {
                if let Some(id) = a.object_ref() {
                    if !objs.contains(id) {
                        let key = if matches!(a, ActionSpec::ShowDataCard { .. }) { "anchor_object_id" } else { "object_id" };
                        out.push(Code::E004, file, &join(p, key), format!("unknown object `{id}`"));
                    }
                }
                if let ActionSpec::Transition { scene_id } = a {
                    if !ids.contains(scene_id.as_str()) {
                        out.push(Code::E005, file, &join(p, "scene_id"), format!("unknown scene `{scene_id}`"));
                    }
                }
            });
            if let Some(n) = &e.next_scene {
                if !ids.contains(n.as_str()) {
                    out.push(Code::E005, file, &join(&ep, "next_scene"), format!("unknown scene `{n}`"));
                }
            }
        }
    }
    out.diags
}

fn column_problem(ds: &Dataset, col: &str, numeric: bool) -> Option<String> {
    match ds.column(col) {
        None => Some(format!("dataset `{}` has no column `{col}`", ds.dataset_id)),
        Some(c) if numeric && c.dtype != DType::Number => Some(format!("column `{col}` is not numeric")),
        Some(_) => None,
    }
}

fn selector_problem(sel: &RowSelector, ds: &Dataset, attrs: Option<&BTreeMap<String, AttrValue>>) -> Option<String> {
    match sel {
        RowSelector::ByIndex { .. } => None,
        RowSelector::ByKey { column, attribute } => column_problem(ds, column, false).or_else(|| {
            attrs
                .is_some_and(|a| !a.contains_key(attribute))
                .then(|| format!("object has no attribute `{attribute}` for by_key"))
        }),
        RowSelector::FirstOfFilter { predicate } => Predicate::compile(predicate, &ds.columns).err().map(|d| d.message),
    }
}

/// All diagnostics for a parsed pack, in a fixed order: manifest, scenes
/// (declaration order), bindings, cards, then reachability and
/// never-firing warnings.
pub fn validate_story(pack: &StoryPack) -> Vec<Diagnostic> {
    let mf = pack.manifest_file.as_str();
    let mut diags = structural(&pack.manifest, mf, &pack.scenes);
    let initial_ok = !diags.iter().any(|d| d.code == Code::E010);
    let mut out = Out { diags: Vec::new() };

    let present: BTreeSet<&str> = pack.meshes.iter().filter(|m| m.present).map(|m| m.path.as_str()).collect();
    for (i, m) in pack.meshes.iter().enumerate() {
        if !m.present {
            out.push(Code::E009, mf, &format!("meshes[{i}]"), format!("mesh file `{}` not found", m.path));
        }
    }

    let datasets: BTreeMap<&str, &Dataset> = pack.datasets.iter().map(|d| (d.item.dataset_id.as_str(), &*d.item)).collect();
    let templates: BTreeMap<&str, &crate::binding::CardTemplate> =
        pack.cards.iter().map(|c| (c.item.template_id.as_str(), &c.item)).collect();
    let narrations: BTreeSet<&str> = pack.narrations.iter().map(|n| n.item.narration_id.as_str()).collect();

    for Located { file, item: s, .. } in &pack.scenes {
        for (i, o) in s.objects.iter().enumerate() {
            if let Some(AttrValue::String(m)) = o.attributes.get("mesh") {
                if !present.contains(m.as_str()) {
                    let p = format!("objects[{i}].attributes.mesh");
                    out.push(Code::E009, file, &p, format!("mesh `{m}` is not an available pack mesh"));
                }
            }
        }
        for (i, e) in s.narrative_sequence.iter().enumerate() {
            let ep = event_path(i);
            if let Trigger::OnNarrationEnd { narration_id: Some(n) } = &e.trigger.kind {
                if !narrations.contains(n.as_str()) {
                    out.push(Code::E008, file, &format!("{ep}.trigger.narration_id"), format!("unknown narration `{n}`"));
                }
            }
            e.action.walk(&join(&ep, "action"), &mut |a, p| match a {
                ActionSpec::PlayNarration { narration_id } if !narrations.contains(narration_id.as_str()) => {
                    out.push(Code::E008, file, &join(p, "narration_id"), format!("unknown narration `{narration_id}`"));
                }
                ActionSpec::ShowDataCard { anchor_object_id, template_id, row_selector } => {
                    let Some(t) = templates.get(template_id.as_str()) else {
                        out.push(Code::E007, file, &join(p, "template_id"), format!("unknown card template `{template_id}`"));
                        return;
                    };
                    let Some(ds) = datasets.get(t.dataset_id.as_str()) else { return };
                    let attrs = s.object(anchor_object_id).map(|o| &o.attributes);
                    if let Some(why) = selector_problem(row_selector, ds, attrs) {
                        out.push(Code::E006, file, &join(p, "row_selector"), why);
                    }
                }
                ActionSpec::SetFilter { dataset_id, predicate } => match datasets.get(dataset_id.as_str()) {
                    None => out.push(Code::E006, file, &join(p, "dataset_id"), format!("unknown dataset `{dataset_id}`")),
                    Some(ds) => {
                        if let Err(d) = Predicate::compile(predicate, &ds.columns) {
                            out.push(Code::E006, file, &join(p, "predicate"), d.message);
                        }
                    }
                },
                _ => {}
            });
        }
    }

    for Located { file, path, item: b } in &pack.bindings {
        let target = pack.scenes.iter().find_map(|s| s.item.object(&b.object_id));
        let Some(ds) = datasets.get(b.dataset_id.as_str()) else {
            out.push(Code::E006, file, &join(path, "dataset_id"), format!("unknown dataset `{}`", b.dataset_id));
            continue;
        };
        for col in b.expr.columns() {
            if let Some(why) = column_problem(ds, col, true) {
                out.push(Code::E006, file, &join(path, "expr"), why);
            }
        }
        match target {
            None => out.push(
                Code::E006,
                file,
                &join(path, "target.object_id"),
                format!("no scene declares object `{}`", b.object_id),
            ),
            Some(o) => {
                if let AttributePath::Attribute(k) = &b.path {
                    if !o.attributes.contains_key(k) {
                        out.push(
                            Code::E006,
                            file,
                            &join(path, "target.attribute_path"),
                            format!("object `{}` has no attribute `{k}`", b.object_id),
                        );
                    }
                }
                if let Some(why) = selector_problem(&b.row_selector, ds, Some(&o.attributes)) {
                    out.push(Code::E006, file, &join(path, "row_selector"), why);
                }
            }
        }
    }

    for Located { file, path, item: t } in &pack.cards {
        let Some(ds) = datasets.get(t.dataset_id.as_str()) else {
            out.push(Code::E007, file, &join(path, "dataset_id"), format!("unknown dataset `{}`", t.dataset_id));
            continue;
        };
        for (field, tpl) in [("title", &t.title), ("body", &t.body)] {
            for col in tpl.columns() {
                if ds.column(col).is_none() {
                    out.push(Code::E007, file, &join(path, field), format!("placeholder `{{{col}}}` names no column"));
                }
            }
        }
    }

    let specs: Vec<&SceneSpec> = pack.scenes.iter().map(|s| &s.item).collect();
    if initial_ok {
        let graph = build_graph(&pack.manifest.initial_scene, &specs);
        let reach = graph.reachable();
        let mut flagged = BTreeSet::new();
        for s in &pack.scenes {
            if !reach.contains(&s.item.scene_id) && flagged.insert(s.item.scene_id.as_str()) {
                let msg = format!("scene `{}` is unreachable from `{}`", s.item.scene_id, pack.manifest.initial_scene);
                out.push(Code::W101, &s.file, "scene_id", msg);
            }
        }
    }

    for Located { file, item: s, .. } in &pack.scenes {
        let mut revealed = BTreeSet::new();
        for e in &s.narrative_sequence {
            e.action.walk("", &mut |a, _| {
                if let ActionSpec::Reveal { object_id } = a {
                    revealed.insert(object_id.clone());
                }
            });
        }
        for (i, e) in s.narrative_sequence.iter().enumerate() {
            let Some(t) = &e.trigger.target else { continue };
            let Some(o) = s.object(t) else { continue };
            let hidden = !RegistryEntry::from_spec(o, &s.scene_id).visible;
            if hidden && !revealed.contains(t) {
                let msg = format!("event `{}` targets `{t}`, which starts hidden and is never revealed", e.event_id);
                out.push(Code::W102, file, &join(&event_path(i), "trigger"), msg);
            }
        }
    }

    diags.append(&mut out.diags);
    diags
}

impl StoryPack {
    /// A pack with no data assets, for building graphs in tests and tools.
    pub fn from_scenes(manifest: StoryManifest, scenes: Vec<SceneSpec>) -> StoryPack {
        let scenes = scenes
            .into_iter()
            .enumerate()
            .map(|(i, s)| Located::new(manifest.scenes.get(i).cloned().unwrap_or_else(|| format!("scenes/{}.json", s.scene_id)), "", s))
            .collect();
        StoryPack {
            manifest_file: "story.json".into(),
            manifest,
            scenes,
            datasets: Vec::new(),
            bindings: Vec::new(),
            cards: Vec::new(),
            narrations: Vec::new(),
            meshes: Vec::new(),
            pack_hash: String::new(),
        }
    }

    /// Validates and, when no errors are found, compiles.
    pub fn compile(&self) -> Result<(StoryGraph, Vec<Diagnostic>), Vec<Diagnostic>> {
        let diags = validate_story(self);
        if crate::diag::has_errors(&diags) {
            return Err(diags);
        }
        let specs: Vec<&SceneSpec> = self.scenes.iter().map(|s| &s.item).collect();
        Ok((build_graph(&self.manifest.initial_scene, &specs), diags))
    }
}

impl StoryManifest {
    pub fn minimal(story_id: &str, initial_scene: &str) -> StoryManifest {
        StoryManifest {
            story_id: story_id.into(),
            title: String::new(),
            format_version: 1,
            initial_scene: initial_scene.into(),
            scenes: Vec::new(),
            datasets: Vec::new(),
            bindings: Vec::new(),
            cards: Vec::new(),
            narrations: Vec::new(),
            meshes: Vec::new(),
            mode_default: Mode::Exploration,
            tts: TtsConfig::default(),
        }
    }
}
