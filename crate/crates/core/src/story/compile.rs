use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use super::{validate, ActionSpec, Located, SceneSpec, StoryManifest};
use crate::diag::{has_errors, Diagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    NextScene,
    Transition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: String,
    pub event_id: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompiledScene {
    pub scene_id: String,
    pub objects: Vec<String>,
    pub events: Vec<String>,
    #[serde(skip)]
    pub spec: SceneSpec,
}

/// Scenes in manifest order plus every transition edge in declaration
/// order: per event, the action's `transition`s (depth first) and then its
/// `next_scene`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoryGraph {
    pub initial: String,
    pub scenes: Vec<CompiledScene>,
    pub edges: Vec<Edge>,
}

impl StoryGraph {
    pub fn scene(&self, id: &str) -> Option<&CompiledScene> {
        self.scenes.iter().find(|s| s.scene_id == id)
    }

    /// Scenes reachable from the initial scene, breadth first.
    pub fn reachable(&self) -> BTreeSet<String> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(&e.from).or_default().push(&e.to);
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        if self.scene(&self.initial).is_some() {
            seen.insert(self.initial.clone());
            queue.push_back(self.initial.as_str());
        }
        while let Some(s) = queue.pop_front() {
            for &t in adj.get(s).map(Vec::as_slice).unwrap_or_default() {
                if seen.insert(t.into()) {
                    queue.push_back(t);
                }
            }
        }
        seen
    }
}

/// Builds the graph without checking references; edges to unknown scenes
/// are dropped.
pub(crate) fn build_graph(initial: &str, scenes: &[&SceneSpec]) -> StoryGraph {
    let known: BTreeSet<&str> = scenes.iter().map(|s| s.scene_id.as_str()).collect();
    let mut edges = Vec::new();
    let mut compiled: Vec<CompiledScene> = Vec::new();
    for s in scenes {
        if compiled.iter().any(|c| c.scene_id == s.scene_id) {
            continue;
        }
        for e in &s.narrative_sequence {
            let mut push = |to: &str, kind| {
                if known.contains(to) {
                    edges.push(Edge { from: s.scene_id.clone(), event_id: e.event_id.clone(), to: to.into(), kind });
                }
            };
            e.action.walk("", &mut |a, _| {
                if let ActionSpec::Transition { scene_id } = a {
                    push(scene_id, EdgeKind::Transition);
                }
            });
            if let Some(n) = &e.next_scene {
                push(n, EdgeKind::NextScene);
            }
        }
        compiled.push(CompiledScene {
            scene_id: s.scene_id.clone(),
            objects: s.objects.iter().map(|o| o.object_id.clone()).collect(),
            events: s.narrative_sequence.iter().map(|e| e.event_id.clone()).collect(),
            spec: (*s).clone(),
        });
    }
    StoryGraph { initial: initial.into(), scenes: compiled, edges }
}

/// Compiles parsed scenes into a graph, refusing on any dangling scene,
/// object or event reference. Scene `i` is attributed to the manifest's
/// `scenes[i]` file in diagnostics.
pub fn compile_story(manifest: &StoryManifest, scenes: &[SceneSpec]) -> Result<StoryGraph, Vec<Diagnostic>> {
    let located: Vec<Located<SceneSpec>> = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| Located::new(manifest.scenes.get(i).cloned().unwrap_or_default(), "", s.clone()))
        .collect();
    let diags = validate::structural(manifest, "story.json", &located);
    if has_errors(&diags) {
        return Err(diags);
    }
    let refs: Vec<&SceneSpec> = scenes.iter().collect();
    Ok(build_graph(&manifest.initial_scene, &refs))
}
