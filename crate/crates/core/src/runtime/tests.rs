use super::*;
use crate::binding::parse_cards;
use crate::narration::parse_narrations;
use crate::story::{parse_scene_spec, Located, StoryManifest};
use alloc::vec;

fn pack(scenes: &[&str], mode: Mode) -> Arc<StoryContext> {
    let specs: Vec<SceneSpec> = scenes.iter().map(|s| parse_scene_spec(s.as_bytes(), "s.json").unwrap()).collect();
    let mut m = StoryManifest::minimal("t", &specs[0].scene_id);
    m.mode_default = mode;
    let mut p = StoryPack::from_scenes(m, specs);
    let words = |n: usize| vec!["word"; n].join(" ");
    // 2.5 words/s: 5 words = 2000 ms, 10 words = 4000 ms.
    let narr = alloc::format!(
        r#"[{{"narration_id":"a","text":"{}"}},{{"narration_id":"b","text":"{}"}},{{"narration_id":"c","text":"{}"}}]"#,
        words(5),
        words(10),
        words(5)
    );
    p.narrations = parse_narrations(narr.as_bytes(), "n.json").unwrap().into_iter().map(|n| Located::new("n.json", "", n)).collect();
    let ds = Dataset::from_records(
        "march",
        vec!["city".into(), "troops".into()],
        vec![vec!["Moscow".into(), "100000".into()], vec!["Wilna".into(), "".into()]],
    )
    .unwrap();
    p.datasets.push(Located::new("story.json", "datasets[0]", Arc::new(ds)));
    let cards = parse_cards(br#"[{"template_id":"c","dataset_id":"march","title":"{city}","body":"Troops: {troops}"}]"#, "c.json").unwrap();
    p.cards = cards.into_iter().map(|c| Located::new("c.json", "", c)).collect();
    p.pack_hash = "h1".into();
    Arc::new(StoryContext::from_pack(&p).unwrap().0)
}

fn kinds(effects: &[Effect]) -> Vec<&'static str> {
    effects.iter().map(|e| e.kind.name()).collect()
}

fn ids(effects: &[Effect]) -> Vec<String> {
    effects
        .iter()
        .filter_map(|e| match &e.kind {
            EffectKind::TriggerFired { event_id, .. } => Some(event_id.clone()),
            _ => None,
        })
        .collect()
}

const MARKERS: &str = r#"{"scene_id":"a","objects":[
  {"object_id":"m1","type":"marker","position":{"x":0,"y":0,"z":0},"attributes":{"city":"Moscow"},
   "interactions":{"on_gesture_select":"card"}},
  {"object_id":"m2","type":"marker","position":{"x":3,"y":0,"z":0},"interactions":{"on_gesture_select":"n2"}},
  {"object_id":"m3","type":"marker","position":{"x":6,"y":0,"z":0},"interactions":{"on_gesture_select":"n1"}}],
 "narrative_sequence":[
  {"event_id":"card","trigger":{"kind":"on_gesture_select","target":"m1"},"action":{"kind":"show_data_card","anchor_object_id":"m1","template_id":"c",
    "row_selector":{"kind":"by_key","column":"city","attribute":"city"}}},
  {"event_id":"n1","trigger":{"kind":"on_gaze","target":"m3","dwell_ms":500},"action":"play_narration:a"},
  {"event_id":"n2","trigger":{"kind":"on_voice","command":"next"},"action":"play_narration:c"},
  {"event_id":"t1","trigger":{"kind":"on_timer","delay_ms":100},"action":"hide:m2"},
  {"event_id":"t2","trigger":{"kind":"on_timer","delay_ms":100},"action":"reveal:m2"}]}"#;

fn select(t: u64, id: &str) -> InteractionEvent {
    InteractionEvent { t_ms: t, event: EventKind::GestureSelect { target: Some(id.into()), ray: None } }
}

#[test]
fn scene_enter_narration_prefix() {
    let s = r#"{"scene_id":"a","objects":[],"narrative_sequence":[
        {"event_id":"e","trigger":"on_scene_enter","action":"play_narration:a"}]}"#;
    let (_, fx) = Runtime::load(pack(&[s], Mode::Exploration)).unwrap();
    assert_eq!(kinds(&fx), ["scene_entered", "trigger_fired", "play_narration", "narration_started"]);
    let (_, again) = Runtime::load(pack(&[s], Mode::Exploration)).unwrap();
    assert_eq!(fx, again);
}

#[test]
fn select_shows_resolved_card() {
    let (mut rt, _) = Runtime::load(pack(&[MARKERS], Mode::Exploration)).unwrap();
    let fx = rt.inject(&select(10, "m1")).unwrap();
    assert_eq!(kinds(&fx), ["trigger_fired", "show_data_card"]);
    let EffectKind::ShowDataCard { card } = &fx[1].kind else { panic!() };
    assert_eq!((card.title.as_str(), card.body.as_str(), card.row_index), ("Moscow", "Troops: 100000", 0));
}

#[test]
fn unmatched_event_only_advances_clock() {
    let (mut rt, _) = Runtime::load(pack(&[MARKERS], Mode::Exploration)).unwrap();
    let fx = rt.inject(&InteractionEvent { t_ms: 50, event: EventKind::Voice { command: "nope".into() } }).unwrap();
    assert!(fx.is_empty());
    assert_eq!(rt.state().clock_ms, 50);
    assert_eq!(rt.inject(&InteractionEvent::tick(10)).unwrap_err().code, Code::E502);
}

#[test]
fn equal_timers_fire_in_declaration_order() {
    let (mut rt, _) = Runtime::load(pack(&[MARKERS], Mode::Exploration)).unwrap();
    let fx = rt.inject(&InteractionEvent::tick(100)).unwrap();
    assert_eq!(ids(&fx), ["t1", "t2"]);
    assert_eq!(kinds(&fx), ["trigger_fired", "hide", "trigger_fired", "reveal"]);
    assert!(fx.iter().all(|e| e.t_ms == 100));
}

#[test]
fn gaze_dwell_threshold_and_exploration_plan() {
    let (mut rt, _) = Runtime::load(pack(&[MARKERS], Mode::Exploration)).unwrap();
    assert!(rt.narration_plan().is_empty());
    let ray = Ray::new(Vec3::new(6.0, 0.0, -5.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
    let gaze = |t, dwell_ms| InteractionEvent { t_ms: t, event: EventKind::Gaze { ray, dwell_ms } };
    assert!(ids(&rt.inject(&gaze(10, 499)).unwrap()).is_empty());
    // m2 then m3: the plan follows the order the user fired them.
    rt.inject(&InteractionEvent { t_ms: 20, event: EventKind::Voice { command: "next".into() } }).unwrap();
    assert_eq!(ids(&rt.inject(&gaze(30, 500)).unwrap()), ["n1"]);
    assert_eq!(rt.narration_plan(), ["c", "a"]);
}

#[test]
fn narration_end_precedes_later_timer() {
    let s = r#"{"scene_id":"a","objects":[{"object_id":"m","type":"marker","position":{"x":0,"y":0,"z":0}}],"narrative_sequence":[
        {"event_id":"late","trigger":{"kind":"on_timer","delay_ms":6000},"action":"hide:m"},
        {"event_id":"go","trigger":{"kind":"on_timer","delay_ms":1000},"action":"play_narration:b"}]}"#;
    let (mut rt, _) = Runtime::load(pack(&[s], Mode::Exploration)).unwrap();
    rt.step(4000);
    let fx = rt.step(2000);
    assert_eq!(kinds(&fx), ["narration_ended", "trigger_fired", "hide"]);
    assert_eq!((fx[0].t_ms, fx[1].t_ms), (5000, 6000));
    assert!(rt.step(0).is_empty());
}

#[test]
fn auto_mode_chains_declared_narrations() {
    let s = r#"{"scene_id":"a","objects":[],"narrative_sequence":[
        {"event_id":"e1","trigger":"on_scene_enter","action":"play_narration:a"},
        {"event_id":"e2","trigger":"on_narration_end","action":"play_narration:b"},
        {"event_id":"e3","trigger":{"kind":"on_voice","command":"more"},"action":"play_narration:c"}]}"#;
    let (mut rt, fx) = Runtime::load(pack(&[s], Mode::AutoNarrative)).unwrap();
    assert_eq!(rt.narration_plan(), ["a", "b", "c"]);
    assert_eq!(kinds(&fx), ["scene_entered", "narration_started", "trigger_fired", "play_narration"]);
    let fx = rt.step(2000);
    assert_eq!(kinds(&fx), ["narration_ended", "trigger_fired", "play_narration", "narration_started"]);
    let EffectKind::NarrationStarted { narration_id, ends_at_ms, .. } = &fx[3].kind else { panic!() };
    assert_eq!((narration_id.as_str(), *ends_at_ms), ("b", 6000));
}

#[test]
fn transitions_are_atomic_and_one_shots_survive_reentry() {
    let a = r#"{"scene_id":"a","objects":[{"object_id":"m","type":"marker","position":{"x":0,"y":0,"z":0}}],"narrative_sequence":[
        {"event_id":"hello","trigger":"on_scene_enter","action":"play_narration:b"},
        {"event_id":"go","trigger":{"kind":"on_gesture_select","target":"m"},"action":"transition:b","repeat":true},
        {"event_id":"never","trigger":{"kind":"on_gesture_select","target":"m"},"action":"hide:m"}]}"#;
    let b = r#"{"scene_id":"b","objects":[],"narrative_sequence":[
        {"event_id":"back","trigger":{"kind":"on_voice","command":"back"},"action":{"kind":"composite","actions":[]},"next_scene":"a","repeat":true}]}"#;
    let (mut rt, _) = Runtime::load(pack(&[a, b], Mode::Exploration)).unwrap();
    let fx = rt.inject(&select(100, "m")).unwrap();
    assert_eq!(kinds(&fx), ["trigger_fired", "transition", "narration_ended", "scene_entered"]);
    assert_eq!(rt.state().current_scene, "b");
    let fx = rt.inject(&InteractionEvent { t_ms: 200, event: EventKind::Voice { command: "back".into() } }).unwrap();
    assert_eq!(kinds(&fx), ["trigger_fired", "transition", "scene_entered"]);
    assert!(rt.narration_plan().is_empty());
}

#[test]
fn moves_interpolate_and_finish_on_clock() {
    let s = r#"{"scene_id":"a","objects":[{"object_id":"m","type":"marker","position":{"x":0,"y":0,"z":0}}],"narrative_sequence":[
        {"event_id":"e","trigger":"on_scene_enter","action":{"kind":"move","object_id":"m","to":{"x":10,"y":0,"z":0},"duration_ms":1000}}]}"#;
    let (mut rt, fx) = Runtime::load(pack(&[s], Mode::Exploration)).unwrap();
    assert_eq!(kinds(&fx), ["scene_entered", "trigger_fired", "move"]);
    assert!(rt.step(250).is_empty());
    assert_eq!(rt.object_position("m"), Some(Vec3::new(2.5, 0.0, 0.0)));
    assert_eq!(rt.scene_registry().unwrap().get("m").unwrap().transform.position, Vec3::ZERO);
    rt.step(750);
    assert_eq!(rt.scene_registry().unwrap().get("m").unwrap().transform.position.x, 10.0);
}

#[test]
fn snapshot_restore_replays_identically() {
    let ctx = pack(&[MARKERS], Mode::Exploration);
    let (mut rt, _) = Runtime::load(ctx.clone()).unwrap();
    rt.inject(&select(10, "m1")).unwrap();
    let blob = rt.snapshot();
    let mut twin = Runtime::restore(ctx.clone(), &blob).unwrap();
    assert_eq!(twin.state(), rt.state());
    assert_eq!(twin.snapshot(), blob);
    let suffix = [InteractionEvent::tick(100), InteractionEvent { t_ms: 150, event: EventKind::Voice { command: "next".into() } }];
    for ev in &suffix {
        assert_eq!(rt.inject(ev).unwrap(), twin.inject(ev).unwrap());
    }
    let mut other = (*ctx).clone();
    other.pack_hash = "h2".into();
    assert_eq!(Runtime::restore(Arc::new(other), &blob).unwrap_err().code, Code::E504);
}
