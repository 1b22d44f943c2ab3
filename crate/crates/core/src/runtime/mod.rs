//! The deterministic narrative state machine.
//!
//! A [`Runtime`] pairs an immutable [`StoryContext`] (compiled graph plus
//! data assets) with a serializable [`RuntimeState`]. Every input is
//! processed in a fixed order and yields a list of [`Effect`]s.
//!
//! Scene entry, in order: `scene_entered`; first-visit registration of the
//! scene's objects; binding application; in auto-narrative mode, queueing
//! of the scene's declared narrations; timer scheduling; `on_scene_enter`
//! events. Clock advance handles due items by time, and at equal times
//! move completions first, then the end of the active narration, then
//! timers by declaration order.

mod effect;
mod event;

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use effect::{Effect, EffectKind};
pub use event::{EventKind, InteractionEvent};

use crate::binding::{apply_bindings, render_data_card, select_row, BindingSpec, CardTemplate};
use crate::data::{Dataset, DatasetView, Predicate};
use crate::diag::{Code, Diagnostic};
use crate::geom::{Ray, Vec3};
use crate::narration::NarrationScript;
use crate::registry::{Registry, SceneRegistry, DEFAULT_CELL_SIZE};
use crate::story::{ActionSpec, AttrValue, Mode, NarrativeEventSpec, SceneSpec, StoryGraph, StoryPack, Trigger, TriggerKind};

/// Farthest a gaze or select ray can pick, in meters.
pub const MAX_PICK_DISTANCE: f64 = 50.0;
/// Radius for `on_proximity` interactions whose event has another trigger.
pub const DEFAULT_PROXIMITY_RADIUS: f64 = 1.0;
/// Scene changes allowed while handling one input.
pub const MAX_TRANSITIONS_PER_INPUT: u32 = 16;
pub const SNAPSHOT_FORMAT: &str = "recit-snapshot-1";

/// Everything the runtime reads but never changes.
#[derive(Debug, Clone)]
pub struct StoryContext {
    pub graph: StoryGraph,
    pub bindings: Vec<BindingSpec>,
    pub cards: BTreeMap<String, CardTemplate>,
    pub narrations: BTreeMap<String, NarrationScript>,
    pub datasets: BTreeMap<String, Arc<Dataset>>,
    pub meshes: BTreeSet<String>,
    pub mode_default: Mode,
    pub pack_hash: String,
}

impl StoryContext {
    /// Validates and compiles `pack`; warnings are returned alongside.
    pub fn from_pack(pack: &StoryPack) -> Result<(StoryContext, Vec<Diagnostic>), Vec<Diagnostic>> {
        let (graph, warnings) = pack.compile()?;
        let ctx = StoryContext {
            graph,
            bindings: pack.bindings.iter().map(|b| b.item.clone()).collect(),
            cards: pack.cards.iter().map(|c| (c.item.template_id.clone(), c.item.clone())).collect(),
            narrations: pack.narrations.iter().map(|n| (n.item.narration_id.clone(), n.item.clone())).collect(),
            datasets: pack.datasets.iter().map(|d| (d.item.dataset_id.clone(), d.item.clone())).collect(),
            meshes: pack.meshes.iter().filter(|m| m.present).map(|m| m.path.clone()).collect(),
            mode_default: pack.manifest.mode_default,
            pack_hash: pack.pack_hash.clone(),
        };
        Ok((ctx, warnings))
    }

    pub fn scene(&self, id: &str) -> Option<&SceneSpec> {
        self.graph.scene(id).map(|c| &c.spec)
    }

    /// Narration ids a scene's actions play, first appearance order.
    pub fn declared_narrations(&self, scene_id: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in self.scene(scene_id).map_or(&[][..], |s| &s.narrative_sequence) {
            e.action.walk("", &mut |a, _| {
                if let ActionSpec::PlayNarration { narration_id } = a {
                    if !out.contains(narration_id) {
                        out.push(narration_id.clone());
                    }
                }
            });
        }
        out
    }

    fn duration_ms(&self, narration_id: &str) -> u64 {
        self.narrations.get(narration_id).map_or(0, NarrationScript::duration_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timer {
    pub due_ms: u64,
    pub event_index: usize,
    pub event_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveNarration {
    pub narration_id: String,
    pub started_ms: u64,
    pub ends_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingMove {
    pub scene_id: String,
    pub object_id: String,
    pub from: Vec3,
    pub to: Vec3,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeState {
    pub current_scene: String,
    pub clock_ms: u64,
    pub next_seq: u64,
    pub mode: Mode,
    /// One-shot records, `(scene_id, event_id)`.
    pub fired: BTreeSet<(String, String)>,
    /// Sorted by `(due_ms, event_index)`.
    pub timers: Vec<Timer>,
    pub narration_queue: VecDeque<String>,
    /// Narrations queued or played during the current scene visit.
    pub planned: BTreeSet<String>,
    pub active_narration: Option<ActiveNarration>,
    pub moves: Vec<PendingMove>,
    /// Dataset id to predicate source.
    pub active_filters: BTreeMap<String, String>,
    pub registry: Registry,
}

#[derive(Serialize, Deserialize)]
struct SnapshotBlob {
    format: String,
    pack_hash: String,
    state: RuntimeState,
}

/// An event that became live for the current input.
struct Candidate {
    index: usize,
    trigger: &'static str,
    object_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Runtime {
    ctx: Arc<StoryContext>,
    state: RuntimeState,
    hops: u32,
}

impl Runtime {
    /// Enters the initial scene. The returned effects start with its
    /// `scene_entered`.
    pub fn load(ctx: Arc<StoryContext>) -> Result<(Runtime, Vec<Effect>), Diagnostic> {
        let mode = ctx.mode_default;
        Self::load_with_mode(ctx, mode)
    }

    pub fn load_with_mode(ctx: Arc<StoryContext>, mode: Mode) -> Result<(Runtime, Vec<Effect>), Diagnostic> {
        let initial = ctx.graph.initial.clone();
        let scene = ctx
            .scene(&initial)
            .ok_or_else(|| Diagnostic::new(Code::E501, format!("initial scene `{initial}` is not compiled")))?;
        for o in &scene.objects {
            if let Some(AttrValue::String(m)) = o.attributes.get("mesh") {
                if !ctx.meshes.contains(m) {
                    return Err(Diagnostic::new(Code::E501, format!("mesh `{m}` of `{}` is missing", o.object_id)));
                }
            }
        }
        for n in ctx.declared_narrations(&initial) {
            if !ctx.narrations.contains_key(&n) {
                return Err(Diagnostic::new(Code::E501, format!("narration `{n}` is missing")));
            }
        }
        let state = RuntimeState {
            current_scene: initial,
            clock_ms: 0,
            next_seq: 0,
            mode,
            fired: BTreeSet::new(),
            timers: Vec::new(),
            narration_queue: VecDeque::new(),
            planned: BTreeSet::new(),
            active_narration: None,
            moves: Vec::new(),
            active_filters: BTreeMap::new(),
            registry: Registry::default(),
        };
        let mut rt = Runtime { ctx, state, hops: 0 };
        let mut out = Vec::new();
        rt.enter_scene(0, &mut out);
        Ok((rt, out))
    }

    pub fn state(&self) -> &RuntimeState {
        &self.state
    }

    pub fn context(&self) -> &Arc<StoryContext> {
        &self.ctx
    }

    pub fn scene_registry(&self) -> Option<&SceneRegistry> {
        self.state.registry.scene(&self.state.current_scene)
    }

    /// Active narration followed by the queue.
    pub fn narration_plan(&self) -> Vec<String> {
        let s = &self.state;
        s.active_narration.iter().map(|a| a.narration_id.clone()).chain(s.narration_queue.iter().cloned()).collect()
    }

    /// Position of an object in the current scene at the current clock,
    /// interpolating an in-flight move.
    pub fn object_position(&self, object_id: &str) -> Option<Vec3> {
        self.position_at(object_id, self.state.clock_ms)
    }

    fn position_at(&self, object_id: &str, t: u64) -> Option<Vec3> {
        let scene = &self.state.current_scene;
        if let Some(m) = self.state.moves.iter().find(|m| &m.scene_id == scene && m.object_id == object_id) {
            let span = (m.end_ms - m.start_ms) as f64;
            let f = ((t.saturating_sub(m.start_ms)) as f64 / span).min(1.0);
            return Some(m.from.lerp(m.to, f));
        }
        Some(self.scene_registry()?.get(object_id)?.transform.position)
    }

    /// Applies one input: advance the clock, then fire every matching event.
    pub fn inject(&mut self, ev: &InteractionEvent) -> Result<Vec<Effect>, Diagnostic> {
        if ev.t_ms < self.state.clock_ms {
            return Err(Diagnostic::new(
                Code::E502,
                format!("event at {} ms is older than the clock ({} ms)", ev.t_ms, self.state.clock_ms),
            ));
        }
        let bad_ray = |r: &Ray| !r.is_valid();
        let invalid = match &ev.event {
            EventKind::Gaze { ray, .. } => bad_ray(ray),
            EventKind::GestureSelect { ray: Some(ray), .. } => bad_ray(ray),
            EventKind::GestureSelect { target: None, ray: None } => {
                return Err(Diagnostic::new(Code::E103, "gesture_select needs a target or a ray"));
            }
            EventKind::Locomotion { to } => !to.is_finite(),
            _ => false,
        };
        if invalid {
            return Err(Diagnostic::new(Code::E103, "ray direction must be unit length and coordinates finite"));
        }
        self.hops = 0;
        let mut out = Vec::new();
        self.advance_to(ev.t_ms, &mut out);
        let t = ev.t_ms;
        let candidates = match &ev.event {
            EventKind::Gaze { ray, dwell_ms } => match self.pick(ray) {
                Some(hit) => self.object_candidates(TriggerKind::OnGaze, &hit, |e| match e.trigger.kind {
                    Trigger::OnGaze { dwell_ms: need } => need <= *dwell_ms,
                    _ => true,
                }),
                None => Vec::new(),
            },
            EventKind::GestureSelect { target, ray } => {
                let hit = match (target, ray) {
                    (Some(id), _) => self.scene_registry().and_then(|r| r.get(id)).filter(|e| e.visible).map(|e| e.object_id.clone()),
                    (None, Some(ray)) => self.pick(ray),
                    (None, None) => None,
                };
                match hit {
                    Some(hit) => self.object_candidates(TriggerKind::OnGestureSelect, &hit, |_| true),
                    None => Vec::new(),
                }
            }
            EventKind::Locomotion { to } => self.proximity_candidates(*to),
            EventKind::Voice { command } => self.voice_candidates(command),
            EventKind::Tick => Vec::new(),
        };
        self.fire(candidates, t, &mut out);
        Ok(out)
    }

    /// Advances the clock by `dt_ms`.
    pub fn step(&mut self, dt_ms: u64) -> Vec<Effect> {
        let t = self.state.clock_ms.saturating_add(dt_ms);
        self.inject(&InteractionEvent::tick(t)).expect("ticks at or after the clock always apply")
    }

    pub fn snapshot(&self) -> String {
        let blob = SnapshotBlob {
            format: SNAPSHOT_FORMAT.into(),
            pack_hash: self.ctx.pack_hash.clone(),
            state: self.state.clone(),
        };
        serde_json::to_string(&blob).expect("runtime state serializes")
    }

    /// Rebuilds a runtime from a snapshot taken against the same pack.
    pub fn restore(ctx: Arc<StoryContext>, blob: &str) -> Result<Runtime, Diagnostic> {
        let b: SnapshotBlob = serde_json::from_str(blob)
            .map_err(|e| Diagnostic::new(Code::E504, format!("unreadable snapshot: {e}")))?;
        if b.format != SNAPSHOT_FORMAT || b.pack_hash != ctx.pack_hash {
            return Err(Diagnostic::new(Code::E504, "snapshot was taken against a different pack"));
        }
        Ok(Runtime { ctx, state: b.state, hops: 0 })
    }

    fn emit(&mut self, out: &mut Vec<Effect>, t_ms: u64, kind: EffectKind) {
        out.push(Effect { seq: self.state.next_seq, t_ms, kind });
        self.state.next_seq += 1;
    }

    fn diag(&mut self, out: &mut Vec<Effect>, t: u64, d: Diagnostic) {
        self.emit(out, t, EffectKind::Diagnostic { code: d.code, message: d.message });
    }

    fn current_spec(&self) -> Arc<StoryContext> {
        self.ctx.clone()
    }

    fn pick(&self, ray: &Ray) -> Option<String> {
        self.scene_registry()?.ray_pick(ray, MAX_PICK_DISTANCE).map(|(id, _)| id)
    }

    fn object_candidates(
        &self,
        kind: TriggerKind,
        object: &str,
        accept: impl Fn(&NarrativeEventSpec) -> bool,
    ) -> Vec<Candidate> {
        let ctx = &self.ctx;
        let Some(scene) = ctx.scene(&self.state.current_scene) else { return Vec::new() };
        let mut idx: BTreeSet<usize> = BTreeSet::new();
        for (i, e) in scene.narrative_sequence.iter().enumerate() {
            if e.trigger.kind.kind() == kind && e.trigger.target.as_deref() == Some(object) && accept(e) {
                idx.insert(i);
            }
        }
        let via = self.scene_registry().and_then(|r| r.get(object)).and_then(|e| e.interactions.get(kind.as_str()));
        if let Some(ev) = via {
            if let Some(i) = scene.narrative_sequence.iter().position(|e| &e.event_id == ev) {
                if accept(&scene.narrative_sequence[i]) {
                    idx.insert(i);
                }
            }
        }
        idx.into_iter()
            .map(|index| Candidate { index, trigger: kind.as_str(), object_id: Some(object.to_string()) })
            .collect()
    }

    fn proximity_candidates(&self, to: Vec3) -> Vec<Candidate> {
        let Some(scene) = self.ctx.scene(&self.state.current_scene) else { return Vec::new() };
        let Some(reg) = self.scene_registry() else { return Vec::new() };
        let near = |id: &str, radius: f64| {
            reg.get(id).is_some_and(|e| e.visible && e.world_bounds().center().distance(to) <= radius)
        };
        let radius_of = |e: &NarrativeEventSpec| match e.trigger.kind {
            Trigger::OnProximity { radius_m } => radius_m,
            _ => DEFAULT_PROXIMITY_RADIUS,
        };
        let mut found: BTreeMap<usize, String> = BTreeMap::new();
        for (i, e) in scene.narrative_sequence.iter().enumerate() {
            if let (Trigger::OnProximity { radius_m }, Some(t)) = (&e.trigger.kind, &e.trigger.target) {
                if near(t, *radius_m) {
                    found.entry(i).or_insert_with(|| t.clone());
                }
            }
        }
        for entry in reg.entries() {
            let Some(ev) = entry.interactions.get(TriggerKind::OnProximity.as_str()) else { continue };
            let Some(i) = scene.narrative_sequence.iter().position(|e| &e.event_id == ev) else { continue };
            if near(&entry.object_id, radius_of(&scene.narrative_sequence[i])) {
                found.entry(i).or_insert_with(|| entry.object_id.clone());
            }
        }
        found
            .into_iter()
            .map(|(index, o)| Candidate { index, trigger: TriggerKind::OnProximity.as_str(), object_id: Some(o) })
            .collect()
    }

    fn voice_candidates(&self, command: &str) -> Vec<Candidate> {
        let Some(scene) = self.ctx.scene(&self.state.current_scene) else { return Vec::new() };
        scene
            .narrative_sequence
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(&e.trigger.kind, Trigger::OnVoice { command: c } if c == command))
            .map(|(index, _)| Candidate { index, trigger: TriggerKind::OnVoice.as_str(), object_id: None })
            .collect()
    }

    /// Fires candidates in order; stops after the first scene change.
    /// Returns whether the scene changed.
    fn fire(&mut self, candidates: Vec<Candidate>, t: u64, out: &mut Vec<Effect>) -> bool {
        let ctx = self.current_spec();
        let scene_id = self.state.current_scene.clone();
        let Some(scene) = ctx.scene(&scene_id) else { return false };
        for c in candidates {
            let e = &scene.narrative_sequence[c.index];
            let key = (scene_id.clone(), e.event_id.clone());
            if !e.repeat && self.state.fired.contains(&key) {
                continue;
            }
            self.emit(
                out,
                t,
                EffectKind::TriggerFired {
                    scene_id: scene_id.clone(),
                    event_id: e.event_id.clone(),
                    trigger: c.trigger,
                    object_id: c.object_id,
                },
            );
            self.state.fired.insert(key);
            let mut target = None;
            self.exec(&e.action, t, &mut target, out);
            if let Some(to) = target.or_else(|| e.next_scene.clone()) {
                self.transition(&to, &e.event_id, t, out);
                return true;
            }
        }
        false
    }

    fn transition(&mut self, to: &str, event_id: &str, t: u64, out: &mut Vec<Effect>) {
        self.hops += 1;
        if self.hops > MAX_TRANSITIONS_PER_INPUT {
            let d = Diagnostic::new(
                Code::E503,
                format!("more than {MAX_TRANSITIONS_PER_INPUT} scene changes for one input; `{event_id}` skipped"),
            );
            self.diag(out, t, d);
            return;
        }
        let from = core::mem::replace(&mut self.state.current_scene, to.to_string());
        self.emit(out, t, EffectKind::Transition { from, to: to.into(), event_id: event_id.into() });
        for m in core::mem::take(&mut self.state.moves) {
            self.finish_move(&m);
        }
        self.state.timers.clear();
        self.state.narration_queue.clear();
        self.state.planned.clear();
        if let Some(a) = self.state.active_narration.take() {
            self.emit(out, t, EffectKind::NarrationEnded { narration_id: a.narration_id, interrupted: true });
        }
        self.enter_scene(t, out);
    }

    fn enter_scene(&mut self, t: u64, out: &mut Vec<Effect>) {
        let ctx = self.current_spec();
        let scene_id = self.state.current_scene.clone();
        let Some(scene) = ctx.scene(&scene_id) else { return };
        self.emit(out, t, EffectKind::SceneEntered { scene_id: scene_id.clone() });
        let (reg, created) =
            self.state.registry.ensure_scene(&scene_id, scene.cell_size.unwrap_or(DEFAULT_CELL_SIZE));
        if created {
            for o in &scene.objects {
                let _ = reg.register_object(o);
                let refs: Vec<String> =
                    ctx.bindings.iter().filter(|b| b.object_id == o.object_id).map(|b| b.binding_id.clone()).collect();
                let _ = reg.set_binding_refs(&o.object_id, refs);
            }
        }
        self.rebind(t, out);
        if self.state.mode == Mode::AutoNarrative {
            for n in ctx.declared_narrations(&scene_id) {
                if self.state.planned.insert(n.clone()) {
                    self.state.narration_queue.push_back(n);
                }
            }
            self.start_next(t, out);
        }
        for (i, e) in scene.narrative_sequence.iter().enumerate() {
            if let Trigger::OnTimer { delay_ms } = e.trigger.kind {
                if e.repeat || !self.state.fired.contains(&(scene_id.clone(), e.event_id.clone())) {
                    self.state.timers.push(Timer { due_ms: t + delay_ms, event_index: i, event_id: e.event_id.clone() });
                }
            }
        }
        self.state.timers.sort_by_key(|tm| (tm.due_ms, tm.event_index));
        let enter: Vec<Candidate> = scene
            .narrative_sequence
            .iter()
            .enumerate()
            .filter(|(_, e)| e.trigger.kind == Trigger::OnSceneEnter)
            .map(|(index, _)| Candidate { index, trigger: TriggerKind::OnSceneEnter.as_str(), object_id: None })
            .collect();
        self.fire(enter, t, out);
    }

    /// Current view of every dataset under the active filters.
    pub fn views(&self) -> BTreeMap<String, DatasetView> {
        self.ctx
            .datasets
            .iter()
            .map(|(id, ds)| {
                let full = DatasetView::full(ds.clone());
                let view = match self.state.active_filters.get(id) {
                    Some(p) => full.filter_str(p).unwrap_or(full),
                    None => full,
                };
                (id.clone(), view)
            })
            .collect()
    }

    fn rebind(&mut self, t: u64, out: &mut Vec<Effect>) {
        let views = self.views();
        let ctx = self.current_spec();
        let Some(reg) = self.state.registry.scene_mut(&self.state.current_scene) else { return };
        let (changes, diags) = apply_bindings(&ctx.bindings, &views, reg);
        for c in changes {
            self.emit(
                out,
                t,
                EffectKind::BindingChanged {
                    binding_id: c.binding_id,
                    object_id: c.object_id,
                    attribute_path: c.attribute_path,
                    old: c.old,
                    new: c.new,
                },
            );
        }
        for d in diags {
            self.diag(out, t, d);
        }
    }

    fn start_next(&mut self, t: u64, out: &mut Vec<Effect>) {
        if self.state.active_narration.is_some() {
            return;
        }
        let Some(id) = self.state.narration_queue.pop_front() else { return };
        let duration_ms = self.ctx.duration_ms(&id);
        let ends_at_ms = t + duration_ms;
        self.state.active_narration = Some(ActiveNarration { narration_id: id.clone(), started_ms: t, ends_at_ms });
        self.emit(out, t, EffectKind::NarrationStarted { narration_id: id, duration_ms, ends_at_ms });
    }

    fn missing(&mut self, out: &mut Vec<Effect>, t: u64, object_id: &str) {
        let d = Diagnostic::new(
            Code::E503,
            format!("object `{object_id}` is not in scene `{}`", self.state.current_scene),
        );
        self.diag(out, t, d);
    }

    fn exec(&mut self, action: &ActionSpec, t: u64, target: &mut Option<String>, out: &mut Vec<Effect>) {
        let scene_id = self.state.current_scene.clone();
        let has = |rt: &Self, id: &str| rt.state.registry.scene(&scene_id).is_some_and(|r| r.get(id).is_some());
        match action {
            ActionSpec::Reveal { object_id } | ActionSpec::Hide { object_id } => {
                let show = matches!(action, ActionSpec::Reveal { .. });
                let Some(reg) = self.state.registry.scene_mut(&scene_id) else { return };
                if reg.set_visible(object_id, show).is_err() {
                    return self.missing(out, t, object_id);
                }
                let object_id = object_id.clone();
                let kind = if show { EffectKind::Reveal { object_id } } else { EffectKind::Hide { object_id } };
                self.emit(out, t, kind);
            }
            ActionSpec::Move { object_id, to, duration_ms } => {
                if !has(self, object_id) {
                    return self.missing(out, t, object_id);
                }
                let from = self.position_at(object_id, t).unwrap_or(*to);
                self.state.moves.retain(|m| !(m.scene_id == scene_id && &m.object_id == object_id));
                self.emit(
                    out,
                    t,
                    EffectKind::Move { object_id: object_id.clone(), from, to: *to, duration_ms: *duration_ms },
                );
                let m = PendingMove {
                    scene_id: scene_id.clone(),
                    object_id: object_id.clone(),
                    from,
                    to: *to,
                    start_ms: t,
                    end_ms: t + duration_ms,
                };
                if *duration_ms == 0 {
                    self.finish_move(&m);
                } else {
                    self.state.moves.push(m);
                }
            }
            ActionSpec::PlayAnimation { object_id, clip_id } => {
                if !has(self, object_id) {
                    return self.missing(out, t, object_id);
                }
                let kind = EffectKind::PlayAnimation { object_id: object_id.clone(), clip_id: clip_id.clone() };
                self.emit(out, t, kind);
            }
            ActionSpec::ShowDataCard { anchor_object_id, template_id, row_selector } => {
                let Some(attrs) = self
                    .state
                    .registry
                    .scene(&scene_id)
                    .and_then(|r| r.get(anchor_object_id))
                    .map(|e| e.attributes.clone())
                else {
                    return self.missing(out, t, anchor_object_id);
                };
                let ctx = self.current_spec();
                let Some(tpl) = ctx.cards.get(template_id) else {
                    let d = Diagnostic::new(Code::E007, format!("unknown card template `{template_id}`"));
                    return self.diag(out, t, d);
                };
                let views = self.views();
                let card = match views.get(&tpl.dataset_id) {
                    None => Err(Diagnostic::new(Code::E407, format!("no dataset `{}`", tpl.dataset_id))),
                    Some(view) => select_row(row_selector, view, Some(&attrs))
                        .and_then(|row| render_data_card(tpl, &row, anchor_object_id)),
                };
                match card {
                    Ok(card) => self.emit(out, t, EffectKind::ShowDataCard { card }),
                    Err(d) => self.diag(out, t, d),
                }
            }
            ActionSpec::PlayNarration { narration_id } => {
                self.emit(out, t, EffectKind::PlayNarration { narration_id: narration_id.clone() });
                let planned = self.state.planned.contains(narration_id);
                if !(self.state.mode == Mode::AutoNarrative && planned) {
                    self.state.narration_queue.push_back(narration_id.clone());
                    self.state.planned.insert(narration_id.clone());
                }
                self.start_next(t, out);
            }
            ActionSpec::Transition { scene_id } => {
                if target.is_none() {
                    *target = Some(scene_id.clone());
                }
            }
            ActionSpec::SetFilter { dataset_id, predicate } => {
                let compiled = match self.ctx.datasets.get(dataset_id) {
                    None => Err(Diagnostic::new(Code::E006, format!("unknown dataset `{dataset_id}`"))),
                    Some(ds) => Predicate::compile(predicate, &ds.columns).map(|p| DatasetView::full(ds.clone()).filter(&p)),
                };
                match compiled {
                    Ok(view) => {
                        self.state.active_filters.insert(dataset_id.clone(), predicate.clone());
                        let kind = EffectKind::SetFilter {
                            dataset_id: dataset_id.clone(),
                            predicate: predicate.clone(),
                            row_count: view.len(),
                        };
                        self.emit(out, t, kind);
                        self.rebind(t, out);
                    }
                    Err(d) => self.diag(out, t, d),
                }
            }
            ActionSpec::Composite { actions } => {
                for a in actions {
                    self.exec(a, t, target, out);
                }
            }
        }
    }

    fn finish_move(&mut self, m: &PendingMove) {
        if let Some(reg) = self.state.registry.scene_mut(&m.scene_id) {
            if let Some(e) = reg.get(&m.object_id) {
                let mut tr = e.transform;
                tr.position = m.to;
                let _ = reg.update_transform(&m.object_id, tr);
            }
        }
    }

    fn advance_to(&mut self, target: u64, out: &mut Vec<Effect>) {
        loop {
            let s = &self.state;
            let next_move = s.moves.iter().enumerate().min_by(|a, b| {
                (a.1.end_ms, &a.1.scene_id, &a.1.object_id).cmp(&(b.1.end_ms, &b.1.scene_id, &b.1.object_id))
            });
            let next_move = next_move.map(|(i, m)| (i, m.end_ms));
            let move_t = next_move.map(|(_, t)| t);
            let narr_t = s.active_narration.as_ref().map(|a| a.ends_at_ms);
            let timer_t = s.timers.first().map(|tm| tm.due_ms);
            let Some(t) = [move_t, narr_t, timer_t].into_iter().flatten().min().filter(|t| *t <= target) else {
                break;
            };
            self.state.clock_ms = self.state.clock_ms.max(t);
            if move_t == Some(t) {
                let i = next_move.expect("move present").0;
                let m = self.state.moves.remove(i);
                self.finish_move(&m);
            } else if narr_t == Some(t) {
                let a = self.state.active_narration.take().expect("narration present");
                self.emit(out, t, EffectKind::NarrationEnded { narration_id: a.narration_id.clone(), interrupted: false });
                let ctx = self.current_spec();
                let ends: Vec<Candidate> = ctx
                    .scene(&self.state.current_scene)
                    .map_or(&[][..], |s| &s.narrative_sequence)
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| match &e.trigger.kind {
                        Trigger::OnNarrationEnd { narration_id } => narration_id.as_ref().is_none_or(|n| *n == a.narration_id),
                        _ => false,
                    })
                    .map(|(index, _)| Candidate { index, trigger: TriggerKind::OnNarrationEnd.as_str(), object_id: None })
                    .collect();
                self.fire(ends, t, out);
                self.start_next(t, out);
            } else {
                let tm = self.state.timers.remove(0);
                let c = Candidate { index: tm.event_index, trigger: TriggerKind::OnTimer.as_str(), object_id: None };
                self.fire(alloc::vec![c], t, out);
            }
        }
        self.state.clock_ms = self.state.clock_ms.max(target);
    }
}

#[cfg(test)]
mod tests;
