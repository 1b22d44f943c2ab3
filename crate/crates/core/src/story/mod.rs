//! Story-pack documents: scenes, manifest, and the compiled story graph.
//!
//! Scene files follow the scene-graph layout
//!
//! ```json
//! {
//!   "scene_id": "overview",
//!   "objects": [{ "object_id": "m1", "type": "marker",
//!                 "position": {"x": 0, "y": 0, "z": 0},
//!                 "attributes": {}, "interactions": {"on_gaze": "e1"} }],
//!   "narrative_sequence": [{ "event_id": "e1", "trigger": "on_scene_enter",
//!                            "action": "play_narration:intro", "next_scene": null }]
//! }
//! ```
//!
//! with optional `orientation` (object) and `repeat` (event) fields. A
//! trigger or action may be a bare string (`"on_scene_enter"`,
//! `"reveal:m2"`) or an object with a `kind` field and parameters.

mod compile;
mod parse;
mod validate;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::binding::{BindingSpec, CardTemplate, RowSelector};
use crate::data::{ColumnTag, Dataset};
use crate::geom::{Quat, Vec3};
use crate::narration::NarrationScript;

pub use compile::{compile_story, CompiledScene, Edge, StoryGraph};
pub use parse::{action_json, parse_manifest, parse_scene_spec, scene_to_json, serialize_scene_spec};
pub(crate) use parse::row_selector as parse_row_selector;
pub use validate::validate_story;

pub const MAX_COMPOSITE_DEPTH: usize = 4;
pub const ORIENTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectType {
    Marker,
    Model,
    Terrain,
    CardAnchor,
    Light,
}

impl ObjectType {
    pub const ALL: [ObjectType; 5] =
        [ObjectType::Marker, ObjectType::Model, ObjectType::Terrain, ObjectType::CardAnchor, ObjectType::Light];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectType::Marker => "marker",
            ObjectType::Model => "model",
            ObjectType::Terrain => "terrain",
            ObjectType::CardAnchor => "card_anchor",
            ObjectType::Light => "light",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Boolean(bool),
    Number(f64),
    String(String),
}

impl AttrValue {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AttrValue::Boolean(b) => (*b).into(),
            AttrValue::Number(n) => serde_json::Number::from_f64(*n).map_or(serde_json::Value::Null, Into::into),
            AttrValue::String(s) => s.clone().into(),
        }
    }
}

/// Names of trigger kinds, used as keys of an object's `interactions`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    OnGaze,
    OnGestureSelect,
    OnProximity,
    OnSceneEnter,
    OnTimer,
    OnNarrationEnd,
    OnVoice,
}

impl TriggerKind {
    pub const ALL: [TriggerKind; 7] = [
        TriggerKind::OnGaze,
        TriggerKind::OnGestureSelect,
        TriggerKind::OnProximity,
        TriggerKind::OnSceneEnter,
        TriggerKind::OnTimer,
        TriggerKind::OnNarrationEnd,
        TriggerKind::OnVoice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TriggerKind::OnGaze => "on_gaze",
            TriggerKind::OnGestureSelect => "on_gesture_select",
            TriggerKind::OnProximity => "on_proximity",
            TriggerKind::OnSceneEnter => "on_scene_enter",
            TriggerKind::OnTimer => "on_timer",
            TriggerKind::OnNarrationEnd => "on_narration_end",
            TriggerKind::OnVoice => "on_voice",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn requires_target(self) -> bool {
        matches!(self, TriggerKind::OnGaze | TriggerKind::OnGestureSelect | TriggerKind::OnProximity)
    }

    pub fn forbids_target(self) -> bool {
        matches!(self, TriggerKind::OnTimer | TriggerKind::OnSceneEnter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Trigger {
    OnGaze { dwell_ms: u64 },
    OnGestureSelect,
    OnProximity { radius_m: f64 },
    OnSceneEnter,
    OnTimer { delay_ms: u64 },
    /// Fires when `narration_id` (or any narration, if unset) finishes.
    OnNarrationEnd { narration_id: Option<String> },
    OnVoice { command: String },
}

impl Trigger {
    pub fn kind(&self) -> TriggerKind {
        match self {
            Trigger::OnGaze { .. } => TriggerKind::OnGaze,
            Trigger::OnGestureSelect => TriggerKind::OnGestureSelect,
            Trigger::OnProximity { .. } => TriggerKind::OnProximity,
            Trigger::OnSceneEnter => TriggerKind::OnSceneEnter,
            Trigger::OnTimer { .. } => TriggerKind::OnTimer,
            Trigger::OnNarrationEnd { .. } => TriggerKind::OnNarrationEnd,
            Trigger::OnVoice { .. } => TriggerKind::OnVoice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerSpec {
    pub kind: Trigger,
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSpec {
    Reveal { object_id: String },
    Hide { object_id: String },
    Move { object_id: String, to: Vec3, duration_ms: u64 },
    PlayAnimation { object_id: String, clip_id: String },
    ShowDataCard { anchor_object_id: String, template_id: String, row_selector: RowSelector },
    PlayNarration { narration_id: String },
    Transition { scene_id: String },
    SetFilter { dataset_id: String, predicate: String },
    Composite { actions: Vec<ActionSpec> },
}

impl ActionSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ActionSpec::Reveal { .. } => "reveal",
            ActionSpec::Hide { .. } => "hide",
            ActionSpec::Move { .. } => "move",
            ActionSpec::PlayAnimation { .. } => "play_animation",
            ActionSpec::ShowDataCard { .. } => "show_data_card",
            ActionSpec::PlayNarration { .. } => "play_narration",
            ActionSpec::Transition { .. } => "transition",
            ActionSpec::SetFilter { .. } => "set_filter",
            ActionSpec::Composite { .. } => "composite",
        }
    }

    /// Depth-first visit of this action and every nested action, with the
    /// document path of each.
    pub fn walk<'a>(&'a self, path: &str, f: &mut dyn FnMut(&'a ActionSpec, &str)) {
        f(self, path);
        if let ActionSpec::Composite { actions } = self {
            for (i, a) in actions.iter().enumerate() {
                a.walk(&alloc::format!("{path}.actions[{i}]"), f);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ActionSpec::Composite { actions } => 1 + actions.iter().map(ActionSpec::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Object ids the action manipulates.
    pub fn object_ref(&self) -> Option<&str> {
        match self {
            ActionSpec::Reveal { object_id }
            | ActionSpec::Hide { object_id }
            | ActionSpec::Move { object_id, .. }
            | ActionSpec::PlayAnimation { object_id, .. } => Some(object_id),
            ActionSpec::ShowDataCard { anchor_object_id, .. } => Some(anchor_object_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObjectSpec {
    pub object_id: String,
    pub object_type: ObjectType,
    pub position: Vec3,
    pub orientation: Quat,
    pub attributes: BTreeMap<String, AttrValue>,
    pub interactions: BTreeMap<TriggerKind, String>,
}

impl SceneObjectSpec {
    pub fn new(object_id: &str, object_type: ObjectType, position: Vec3) -> Self {
        SceneObjectSpec {
            object_id: object_id.into(),
            object_type,
            position,
            orientation: Quat::IDENTITY,
            attributes: BTreeMap::new(),
            interactions: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeEventSpec {
    pub event_id: String,
    pub trigger: TriggerSpec,
    pub action: ActionSpec,
    pub next_scene: Option<String>,
    pub repeat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: String,
    pub objects: Vec<SceneObjectSpec>,
    pub narrative_sequence: Vec<NarrativeEventSpec>,
    /// Spatial index cell size in meters.
    pub cell_size: Option<f64>,
}

impl SceneSpec {
    pub fn object(&self, id: &str) -> Option<&SceneObjectSpec> {
        self.objects.iter().find(|o| o.object_id == id)
    }

    pub fn event(&self, id: &str) -> Option<&NarrativeEventSpec> {
        self.narrative_sequence.iter().find(|e| e.event_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    AutoNarrative,
    #[default]
    Exploration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub dataset_id: String,
    pub path: String,
    pub tags: BTreeMap<String, BTreeSet<ColumnTag>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TtsConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub voice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryManifest {
    pub story_id: String,
    pub title: String,
    pub format_version: u64,
    pub initial_scene: String,
    pub scenes: Vec<String>,
    pub datasets: Vec<DatasetRef>,
    pub bindings: Vec<String>,
    pub cards: Vec<String>,
    pub narrations: Vec<String>,
    pub meshes: Vec<String>,
    pub mode_default: Mode,
    pub tts: TtsConfig,
}

/// An item together with the file and document path it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Located<T> {
    pub file: String,
    pub path: String,
    pub item: T,
}

impl<T> Located<T> {
    pub fn new(file: impl Into<String>, path: impl Into<String>, item: T) -> Self {
        Located { file: file.into(), path: path.into(), item }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRef {
    pub path: String,
    pub present: bool,
}

/// Every parsed document of a story pack.
#[derive(Debug, Clone)]
pub struct StoryPack {
    pub manifest_file: String,
    pub manifest: StoryManifest,
    pub scenes: Vec<Located<SceneSpec>>,
    pub datasets: Vec<Located<Arc<Dataset>>>,
    pub bindings: Vec<Located<BindingSpec>>,
    pub cards: Vec<Located<CardTemplate>>,
    pub narrations: Vec<Located<NarrationScript>>,
    pub meshes: Vec<MeshRef>,
    /// Content hash of the pack's files, checked when restoring snapshots.
    pub pack_hash: String,
}

impl StoryPack {
    pub fn scene(&self, id: &str) -> Option<&SceneSpec> {
        self.scenes.iter().map(|s| &s.item).find(|s| s.scene_id == id)
    }

    pub fn dataset(&self, id: &str) -> Option<&Arc<Dataset>> {
        self.datasets.iter().map(|d| &d.item).find(|d| d.dataset_id == id)
    }
}
