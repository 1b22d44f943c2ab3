use alloc::string::String;

use crate::binding::DataCard;
use crate::fmt::{canonical_vec3, ObjectWriter};
use crate::geom::Vec3;
use crate::story::AttrValue;
use crate::Code;

/// One observable step of the runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub seq: u64,
    pub t_ms: u64,
    pub kind: EffectKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EffectKind {
    SceneEntered { scene_id: String },
    TriggerFired { scene_id: String, event_id: String, trigger: &'static str, object_id: Option<String> },
    Reveal { object_id: String },
    Hide { object_id: String },
    Move { object_id: String, from: Vec3, to: Vec3, duration_ms: u64 },
    PlayAnimation { object_id: String, clip_id: String },
    ShowDataCard { card: DataCard },
    PlayNarration { narration_id: String },
    NarrationStarted { narration_id: String, duration_ms: u64, ends_at_ms: u64 },
    NarrationEnded { narration_id: String, interrupted: bool },
    Transition { from: String, to: String, event_id: String },
    SetFilter { dataset_id: String, predicate: String, row_count: usize },
    BindingChanged { binding_id: String, object_id: String, attribute_path: String, old: Option<AttrValue>, new: AttrValue },
    Diagnostic { code: Code, message: String },
}

impl EffectKind {
    pub fn name(&self) -> &'static str {
        match self {
            EffectKind::SceneEntered { .. } => "scene_entered",
            EffectKind::TriggerFired { .. } => "trigger_fired",
            EffectKind::Reveal { .. } => "reveal",
            EffectKind::Hide { .. } => "hide",
            EffectKind::Move { .. } => "move",
            EffectKind::PlayAnimation { .. } => "play_animation",
            EffectKind::ShowDataCard { .. } => "show_data_card",
            EffectKind::PlayNarration { .. } => "play_narration",
            EffectKind::NarrationStarted { .. } => "narration_started",
            EffectKind::NarrationEnded { .. } => "narration_ended",
            EffectKind::Transition { .. } => "transition",
            EffectKind::SetFilter { .. } => "set_filter",
            EffectKind::BindingChanged { .. } => "binding_changed",
            EffectKind::Diagnostic { .. } => "diagnostic",
        }
    }
}

fn attr(v: &AttrValue) -> String {
    let mut s = String::new();
    match v {
        AttrValue::Boolean(b) => s.push_str(if *b { "true" } else { "false" }),
        AttrValue::Number(n) => s.push_str(&crate::fmt::canonical_number(*n)),
        AttrValue::String(t) => crate::fmt::push_json_string(&mut s, t),
    }
    s
}

impl Effect {
    /// The effect-log line: `seq`, `t_ms`, `kind`, then the kind's fields
    /// in declaration order. Numbers use the canonical 9-digit form.
    pub fn to_canonical_json(&self) -> String {
        let mut s = String::new();
        let mut w = ObjectWriter::new(&mut s);
        w.int("seq", self.seq).int("t_ms", self.t_ms).str("kind", self.kind.name());
        match &self.kind {
            EffectKind::SceneEntered { scene_id } => {
                w.str("scene_id", scene_id);
            }
            EffectKind::TriggerFired { scene_id, event_id, trigger, object_id } => {
                w.str("scene_id", scene_id).str("event_id", event_id).str("trigger", trigger).opt_str("object_id", object_id.as_deref());
            }
            EffectKind::Reveal { object_id } | EffectKind::Hide { object_id } => {
                w.str("object_id", object_id);
            }
            EffectKind::Move { object_id, from, to, duration_ms } => {
                w.str("object_id", object_id)
                    .raw("from", &canonical_vec3(*from))
                    .raw("to", &canonical_vec3(*to))
                    .int("duration_ms", *duration_ms);
            }
            EffectKind::PlayAnimation { object_id, clip_id } => {
                w.str("object_id", object_id).str("clip_id", clip_id);
            }
            EffectKind::ShowDataCard { card } => {
                w.str("card_id", &card.card_id)
                    .str("anchor_object_id", &card.anchor_object_id)
                    .str("title", &card.title)
                    .str("body", &card.body)
                    .str("dataset_id", &card.dataset_id)
                    .int("row_index", card.row_index as u64);
            }
            EffectKind::PlayNarration { narration_id } => {
                w.str("narration_id", narration_id);
            }
            EffectKind::NarrationStarted { narration_id, duration_ms, ends_at_ms } => {
                w.str("narration_id", narration_id).int("duration_ms", *duration_ms).int("ends_at_ms", *ends_at_ms);
            }
            EffectKind::NarrationEnded { narration_id, interrupted } => {
                w.str("narration_id", narration_id).bool("interrupted", *interrupted);
            }
            EffectKind::Transition { from, to, event_id } => {
                w.str("from", from).str("to", to).str("event_id", event_id);
            }
            EffectKind::SetFilter { dataset_id, predicate, row_count } => {
                w.str("dataset_id", dataset_id).str("predicate", predicate).int("row_count", *row_count as u64);
            }
            EffectKind::BindingChanged { binding_id, object_id, attribute_path, old, new } => {
                w.str("binding_id", binding_id).str("object_id", object_id).str("attribute_path", attribute_path);
                match old {
                    Some(v) => w.raw("old", &attr(v)),
                    None => w.raw("old", "null"),
                };
                w.raw("new", &attr(new));
            }
            EffectKind::Diagnostic { code, message } => {
                w.str("code", code.as_str()).str("message", message);
            }
        }
        w.finish();
        s
    }
}
