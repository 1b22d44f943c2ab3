//! Data bindings from dataset rows to scene-object attributes, and
//! data-card templates.
//!
//! `bindings/*.json` holds a list of
//!
//! ```json
//! { "binding_id": "b1", "dataset_id": "march",
//!   "row_selector": { "kind": "by_key", "column": "waypoint", "attribute": "waypoint" },
//!   "target": { "object_id": "m1", "attribute_path": "transform.scale.y" },
//!   "expr": "scale($troops, 0, 422000, 0.2, 3)" }
//! ```
//!
//! and `cards/*.json` a list of `{template_id, dataset_id, title, body}`.

mod card;
mod expr;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use card::{render_data_card, CardTemplate, DataCard, Template, NULL_TEXT};
pub use expr::{scale, BinOp, Expr, Func, MAX_NESTING};

use crate::data::{DatasetView, Predicate, RowRef, Value};
use crate::diag::{Code, Diagnostic};
use crate::doc::{join, Doc, Reader};
use crate::geom::Vec3;
use crate::registry::SceneRegistry;
use crate::story::AttrValue;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowSelector {
    /// The row whose `column` equals the bound object's `attribute` value.
    ByKey { column: String, attribute: String },
    /// Position within the (possibly filtered) view.
    ByIndex { index: usize },
    FirstOfFilter { predicate: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TransformPart {
    Position,
    Scale,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttributePath {
    Transform(TransformPart, usize),
    Attribute(String),
}

impl AttributePath {
    pub fn parse(s: &str) -> Option<AttributePath> {
        if let Some(key) = s.strip_prefix("attributes.") {
            let ok = !key.is_empty() && key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_');
            return ok.then(|| AttributePath::Attribute(key.into()));
        }
        let rest = s.strip_prefix("transform.")?;
        let (part, axis) = rest.split_once('.')?;
        let part = match part {
            "position" => TransformPart::Position,
            "scale" => TransformPart::Scale,
            _ => return None,
        };
        let axis = match axis {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return None,
        };
        Some(AttributePath::Transform(part, axis))
    }
}

impl fmt::Display for AttributePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributePath::Attribute(k) => write!(f, "attributes.{k}"),
            AttributePath::Transform(part, axis) => {
                let p = match part {
                    TransformPart::Position => "position",
                    TransformPart::Scale => "scale",
                };
                write!(f, "transform.{p}.{}", ["x", "y", "z"][*axis])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BindingSpec {
    pub binding_id: String,
    pub dataset_id: String,
    pub row_selector: RowSelector,
    pub object_id: String,
    pub path: AttributePath,
    pub expr: Expr,
    pub expr_src: String,
}

/// One write performed by [`apply_bindings`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingChange {
    pub binding_id: String,
    pub object_id: String,
    pub attribute_path: String,
    pub old: Option<AttrValue>,
    pub new: AttrValue,
}

pub fn parse_bindings(bytes: &[u8], file: &str) -> Result<Vec<BindingSpec>, Vec<Diagnostic>> {
    let doc = Doc::parse(bytes).map_err(|d| alloc::vec![d.in_file(file)])?;
    let mut r = Reader::new(file);
    let out = match r.array(&doc, "") {
        Some(items) => items.iter().enumerate().filter_map(|(i, d)| binding(&mut r, d, &format!("[{i}]"))).collect(),
        None => Vec::new(),
    };
    if r.diags.is_empty() {
        Ok(out)
    } else {
        Err(r.diags)
    }
}

fn binding(r: &mut Reader, doc: &Doc, path: &str) -> Option<BindingSpec> {
    r.object(doc, path)?;
    let binding_id = r.ident(doc, path, "binding_id");
    let dataset_id = r.ident(doc, path, "dataset_id");
    let selector = r
        .req(doc, path, "row_selector")
        .and_then(|v| crate::story::parse_row_selector(r, v, &join(path, "row_selector")));
    let tp = join(path, "target");
    let target = r.req(doc, path, "target").and_then(|t| {
        r.object(t, &tp)?;
        let object_id = r.ident(t, &tp, "object_id");
        let ap = join(&tp, "attribute_path");
        let attr = r.ident(t, &tp, "attribute_path").and_then(|s| {
            let parsed = AttributePath::parse(&s);
            if parsed.is_none() {
                r.report(Code::E006, &ap, format!("malformed attribute path `{s}`"));
            }
            parsed
        });
        Some((object_id?, attr?))
    });
    let ep = join(path, "expr");
    let expr = r.req(doc, path, "expr").and_then(|v| r.string(v, &ep)).and_then(|src| match Expr::parse(&src) {
        Ok(e) => Some((e, src)),
        Err(d) => {
            r.report(d.code, &ep, d.message);
            None
        }
    });
    let (object_id, path) = target?;
    let (expr, expr_src) = expr?;
    Some(BindingSpec {
        binding_id: binding_id?,
        dataset_id: dataset_id?,
        row_selector: selector?,
        object_id,
        path,
        expr,
        expr_src,
    })
}

pub fn parse_cards(bytes: &[u8], file: &str) -> Result<Vec<CardTemplate>, Vec<Diagnostic>> {
    let doc = Doc::parse(bytes).map_err(|d| alloc::vec![d.in_file(file)])?;
    let mut r = Reader::new(file);
    let mut out = Vec::new();
    for (i, d) in r.array(&doc, "").unwrap_or_default().iter().enumerate() {
        let p = format!("[{i}]");
        if r.object(d, &p).is_none() {
            continue;
        }
        let id = r.ident(d, &p, "template_id");
        let ds = r.ident(d, &p, "dataset_id");
        let title = r.opt_string(d, &p, "title").unwrap_or_default();
        let body = r.req(d, &p, "body").and_then(|v| r.string(v, &join(&p, "body")));
        let (Some(id), Some(ds), Some(body)) = (id, ds, body) else { continue };
        match CardTemplate::new(&id, &ds, &title, &body) {
            Ok(t) => out.push(t),
            Err(e) => r.report(e.code, &p, e.message),
        }
    }
    if r.diags.is_empty() {
        Ok(out)
    } else {
        Err(r.diags)
    }
}

fn key_matches(attr: &AttrValue, cell: &Value) -> bool {
    match (attr, cell) {
        (AttrValue::Number(a), Value::Number(b)) => a == b,
        (AttrValue::Boolean(a), Value::Boolean(b)) => a == b,
        (AttrValue::String(a), Value::String(b)) => a == b,
        (AttrValue::String(a), Value::Timestamp { text, .. }) => a == text,
        _ => false,
    }
}

/// Resolves a selector to exactly one row of `view`, or E407.
pub fn select_row<'v>(
    selector: &RowSelector,
    view: &'v DatasetView,
    object_attrs: Option<&BTreeMap<String, AttrValue>>,
) -> Result<RowRef<'v>, Diagnostic> {
    let none = |why: String| Diagnostic::new(Code::E407, why);
    match selector {
        RowSelector::ByIndex { index } => view
            .rows()
            .nth(*index)
            .ok_or_else(|| none(format!("row index {index} outside view of {} rows", view.len()))),
        RowSelector::ByKey { column, attribute } => {
            let key = object_attrs
                .and_then(|a| a.get(attribute))
                .ok_or_else(|| none(format!("object has no attribute `{attribute}`")))?;
            let mut hits = view.rows().filter(|row| row.get(column).is_some_and(|c| key_matches(key, c)));
            match (hits.next(), hits.next()) {
                (Some(row), None) => Ok(row),
                (None, _) => Err(none(format!("no row with {column} = {key:?}"))),
                (Some(_), Some(_)) => Err(none(format!("several rows with {column} = {key:?}"))),
            }
        }
        RowSelector::FirstOfFilter { predicate } => {
            let p = Predicate::compile(predicate, &view.dataset().columns).map_err(|d| none(d.message))?;
            view.rows()
                .find(|row| p.eval(row.cells))
                .ok_or_else(|| none(format!("no row satisfies `{predicate}`")))
        }
    }
}

fn read_target(reg: &SceneRegistry, object_id: &str, path: &AttributePath) -> Option<AttrValue> {
    let e = reg.get(object_id)?;
    match path {
        AttributePath::Transform(TransformPart::Position, i) => Some(AttrValue::Number(e.transform.position.axis(*i))),
        AttributePath::Transform(TransformPart::Scale, i) => Some(AttrValue::Number(e.transform.scale.axis(*i))),
        AttributePath::Attribute(k) => e.attributes.get(k).cloned(),
    }
}

fn set_axis(v: &mut Vec3, i: usize, x: f64) {
    match i {
        0 => v.x = x,
        1 => v.y = x,
        _ => v.z = x,
    }
}

/// Evaluates every binding whose target object lives in `reg` and writes
/// the results through it, in declaration order.
///
/// Writes to one target are last-wins and all of them are reported; a
/// target whose final value equals its value before the call is left out
/// of the change list entirely, so re-applying against unchanged views
/// reports nothing. Selector failures yield E407 and skip the binding.
pub fn apply_bindings(
    bindings: &[BindingSpec],
    views: &BTreeMap<String, DatasetView>,
    reg: &mut SceneRegistry,
) -> (Vec<BindingChange>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut writes: Vec<(usize, BindingChange)> = Vec::new();
    let mut current: BTreeMap<(String, AttributePath), Option<AttrValue>> = BTreeMap::new();
    let mut before: BTreeMap<(String, AttributePath), Option<AttrValue>> = BTreeMap::new();
    for b in bindings {
        let Some(entry) = reg.get(&b.object_id) else { continue };
        let fail = |d: Diagnostic| d.with_path(format!("binding {}", b.binding_id));
        let Some(view) = views.get(&b.dataset_id) else {
            diags.push(fail(Diagnostic::new(Code::E407, format!("no dataset `{}`", b.dataset_id))));
            continue;
        };
        let value = select_row(&b.row_selector, view, Some(&entry.attributes)).and_then(|row| b.expr.eval(&row));
        let value = match value {
            Ok(v) => v,
            Err(d) => {
                diags.push(fail(d));
                continue;
            }
        };
        let key = (b.object_id.clone(), b.path.clone());
        let old = current.get(&key).cloned().unwrap_or_else(|| read_target(reg, &b.object_id, &b.path));
        before.entry(key.clone()).or_insert_with(|| old.clone());
        let new = AttrValue::Number(value);
        current.insert(key, Some(new.clone()));
        writes.push((
            writes.len(),
            BindingChange {
                binding_id: b.binding_id.clone(),
                object_id: b.object_id.clone(),
                attribute_path: b.path.to_string(),
                old,
                new,
            },
        ));
    }
    let changed: BTreeMap<_, _> = current.into_iter().filter(|(k, v)| before.get(k) != Some(v)).collect();
    let mut transforms: BTreeMap<String, crate::geom::Transform> = BTreeMap::new();
    for ((object_id, path), value) in &changed {
        let Some(AttrValue::Number(v)) = value else { continue };
        match path {
            AttributePath::Attribute(k) => {
                let _ = reg.set_attribute(object_id, k, AttrValue::Number(*v));
            }
            AttributePath::Transform(part, i) => {
                let t = transforms
                    .entry(object_id.clone())
                    .or_insert_with(|| reg.get(object_id).expect("bound object present").transform);
                match part {
                    TransformPart::Position => set_axis(&mut t.position, *i, *v),
                    TransformPart::Scale => set_axis(&mut t.scale, *i, *v),
                }
            }
        }
    }
    for (object_id, t) in transforms {
        if let Err(d) = reg.update_transform(&object_id, t) {
            diags.push(d);
        }
    }
    let changes = writes
        .into_iter()
        .filter(|(_, c)| {
            let path = AttributePath::parse(&c.attribute_path).expect("path round-trips");
            changed.contains_key(&(c.object_id.clone(), path))
        })
        .map(|(_, c)| c)
        .collect();
    (changes, diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::story::{ObjectType, SceneObjectSpec};
    use alloc::sync::Arc;
    use alloc::vec;

    fn setup() -> (BTreeMap<String, DatasetView>, SceneRegistry) {
        let s = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let ds = Dataset::from_records(
            "march",
            s(&["city", "troops"]),
            vec![s(&["Kowno", "422000"]), s(&["Moscow", "1000"]), s(&["Wilna", "500"])],
        )
        .unwrap();
        let mut views = BTreeMap::new();
        views.insert("march".to_string(), DatasetView::full(Arc::new(ds)));
        let mut reg = SceneRegistry::new("s", 0.5);
        let mut m = SceneObjectSpec::new("m1", ObjectType::Marker, Vec3::ZERO);
        m.attributes.insert("city".into(), AttrValue::String("Moscow".into()));
        reg.register_object(&m).unwrap();
        (views, reg)
    }

    fn b(id: &str, path: &str, expr: &str, sel: RowSelector) -> BindingSpec {
        BindingSpec {
            binding_id: id.into(),
            dataset_id: "march".into(),
            row_selector: sel,
            object_id: "m1".into(),
            path: AttributePath::parse(path).unwrap(),
            expr: Expr::parse(expr).unwrap(),
            expr_src: expr.into(),
        }
    }

    fn by_city() -> RowSelector {
        RowSelector::ByKey { column: "city".into(), attribute: "city".into() }
    }

    #[test]
    fn scale_endpoint_write() {
        let (views, mut reg) = setup();
        let bs = [b("b1", "transform.scale.y", "scale($troops, 0, 1000, 0, 3)", by_city())];
        let (ch, d) = apply_bindings(&bs, &views, &mut reg);
        assert!(d.is_empty());
        assert_eq!(ch.len(), 1);
        assert_eq!((ch[0].old.clone(), ch[0].new.clone()), (Some(AttrValue::Number(1.0)), AttrValue::Number(3.0)));
        assert_eq!(reg.get("m1").unwrap().transform.scale.y, 3.0);
        let (again, _) = apply_bindings(&bs, &views, &mut reg);
        assert!(again.is_empty());
    }

    #[test]
    fn last_declared_wins_and_both_recorded() {
        let (views, mut reg) = setup();
        let bs = [
            b("a", "attributes.size", "1", by_city()),
            b("b", "attributes.size", "$troops / 100", by_city()),
        ];
        let (ch, _) = apply_bindings(&bs, &views, &mut reg);
        let ids: Vec<_> = ch.iter().map(|c| c.binding_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(ch[1].old, Some(AttrValue::Number(1.0)));
        assert_eq!(reg.get("m1").unwrap().attributes["size"], AttrValue::Number(10.0));
    }

    #[test]
    fn filtered_out_row_is_e407() {
        let (mut views, mut reg) = setup();
        let v = views["march"].filter_str("troops > 5000").unwrap();
        views.insert("march".into(), v);
        let bs = [b("b1", "transform.scale.y", "$troops", by_city())];
        let (ch, d) = apply_bindings(&bs, &views, &mut reg);
        assert!(ch.is_empty());
        assert_eq!(d[0].code, Code::E407);
        assert_eq!(reg.get("m1").unwrap().transform.scale.y, 1.0);
    }

    #[test]
    fn selectors() {
        let (views, _) = setup();
        let v = &views["march"];
        assert_eq!(select_row(&RowSelector::ByIndex { index: 2 }, v, None).unwrap().index, 2);
        assert_eq!(select_row(&RowSelector::ByIndex { index: 3 }, v, None).unwrap_err().code, Code::E407);
        let f = RowSelector::FirstOfFilter { predicate: "troops < 2000".into() };
        assert_eq!(select_row(&f, v, None).unwrap().index, 1);
    }

    #[test]
    fn attribute_paths() {
        for p in ["transform.position.x", "transform.scale.z", "attributes.height_m"] {
            assert_eq!(AttributePath::parse(p).unwrap().to_string(), p);
        }
        for p in ["transform.rotation.x", "transform.scale", "attributes.", "color"] {
            assert!(AttributePath::parse(p).is_none());
        }
    }

    #[test]
    fn binding_file() {
        let src = br#"[{"binding_id":"b1","dataset_id":"march","row_selector":{"kind":"by_index","index":0},
            "target":{"object_id":"m1","attribute_path":"transform.scale.y"},"expr":"$troops / 1000"},
            {"binding_id":"b2","dataset_id":"march","row_selector":{"kind":"by_index","index":0},
            "target":{"object_id":"m1","attribute_path":"transform.spin.y"},"expr":"scale($troops, 0, 1)"}]"#;
        let d = parse_bindings(src, "bindings/b.json").unwrap_err();
        let got: Vec<_> = d.iter().map(|d| (d.code, d.path.as_str())).collect();
        assert_eq!(got, [(Code::E006, "[1].target.attribute_path"), (Code::E403, "[1].expr")]);
    }
}
