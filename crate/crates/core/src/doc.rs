//! Order-preserving JSON tree plus a path-tracking field reader.
//!
//! Story documents are parsed into [`Doc`] first so that every structural
//! problem can be reported (with its `a.b[2].c` path) instead of stopping
//! at the first serde error. Objects keep duplicate keys so they can be
//! flagged.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};

use crate::diag::{Code, Diagnostic};
use crate::geom::{Quat, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum Doc {
    Null,
    Bool(bool),
    Number(f64),
    String(String),
    Array(Vec<Doc>),
    Object(Vec<(String, Doc)>),
}

impl Doc {
    pub fn kind(&self) -> &'static str {
        match self {
            Doc::Null => "null",
            Doc::Bool(_) => "boolean",
            Doc::Number(_) => "number",
            Doc::String(_) => "string",
            Doc::Array(_) => "array",
            Doc::Object(_) => "object",
        }
    }

    pub fn get(&self, key: &str) -> Option<&Doc> {
        match self {
            Doc::Object(fields) => fields.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Doc::String(s) => Some(s),
            _ => None,
        }
    }

    /// Parses UTF-8 JSON. Syntax errors become a single E101.
    pub fn parse(bytes: &[u8]) -> Result<Doc, Diagnostic> {
        let text = core::str::from_utf8(bytes).map_err(|e| Diagnostic::new(Code::E101, format!("invalid UTF-8: {e}")))?;
        serde_json::from_str(text).map_err(|e| Diagnostic::new(Code::E101, format!("malformed JSON: {e}")))
    }
}

impl<'de> Deserialize<'de> for Doc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Doc, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Doc;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("any JSON value")
            }
            fn visit_unit<E>(self) -> Result<Doc, E> {
                Ok(Doc::Null)
            }
            fn visit_bool<E>(self, v: bool) -> Result<Doc, E> {
                Ok(Doc::Bool(v))
            }
            fn visit_i64<E>(self, v: i64) -> Result<Doc, E> {
                Ok(Doc::Number(v as f64))
            }
            fn visit_u64<E>(self, v: u64) -> Result<Doc, E> {
                Ok(Doc::Number(v as f64))
            }
            fn visit_f64<E>(self, v: f64) -> Result<Doc, E> {
                Ok(Doc::Number(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Doc, E> {
                Ok(Doc::String(v.to_owned()))
            }
            fn visit_string<E>(self, v: String) -> Result<Doc, E> {
                Ok(Doc::String(v))
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Doc, A::Error> {
                let mut out = Vec::new();
                while let Some(v) = seq.next_element()? {
                    out.push(v);
                }
                Ok(Doc::Array(out))
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Doc, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Doc>()? {
                    out.push((k, v));
                }
                Ok(Doc::Object(out))
            }
        }
        d.deserialize_any(V)
    }
}

pub fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.into()
    } else {
        format!("{path}.{key}")
    }
}

pub fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

/// Accumulates diagnostics for one file while reading fields.
pub struct Reader {
    pub file: String,
    pub diags: Vec<Diagnostic>,
}

impl Reader {
    pub fn new(file: impl Into<String>) -> Self {
        Self { file: file.into(), diags: Vec::new() }
    }

    pub fn report(&mut self, code: Code, path: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(code, message).at(self.file.clone(), path));
    }

    pub fn wrong_type(&mut self, path: &str, expected: &str, got: &Doc) {
        self.report(Code::E103, path, format!("expected {expected}, found {}", got.kind()));
    }

    /// Returns the object's fields, flagging duplicate keys.
    pub fn object<'d>(&mut self, doc: &'d Doc, path: &str) -> Option<&'d [(String, Doc)]> {
        match doc {
            Doc::Object(fields) => {
                for (i, (k, _)) in fields.iter().enumerate() {
                    if fields[..i].iter().any(|(p, _)| p == k) {
                        self.report(Code::E103, &join(path, k), format!("duplicate key `{k}`"));
                    }
                }
                Some(fields)
            }
            other => {
                self.wrong_type(path, "object", other);
                None
            }
        }
    }

    pub fn array<'d>(&mut self, doc: &'d Doc, path: &str) -> Option<&'d [Doc]> {
        match doc {
            Doc::Array(items) => Some(items),
            other => {
                self.wrong_type(path, "array", other);
                None
            }
        }
    }

    fn field<'d>(&mut self, obj: &'d Doc, path: &str, key: &str, required: bool) -> Option<&'d Doc> {
        match obj.get(key) {
            Some(Doc::Null) | None => {
                if required {
                    self.report(Code::E102, &join(path, key), format!("missing required field `{key}`"));
                }
                None
            }
            Some(v) => Some(v),
        }
    }

    pub fn req<'d>(&mut self, obj: &'d Doc, path: &str, key: &str) -> Option<&'d Doc> {
        self.field(obj, path, key, true)
    }

    pub fn opt<'d>(&mut self, obj: &'d Doc, path: &str, key: &str) -> Option<&'d Doc> {
        self.field(obj, path, key, false)
    }

    pub fn string(&mut self, doc: &Doc, path: &str) -> Option<String> {
        match doc {
            Doc::String(s) => Some(s.clone()),
            other => {
                self.wrong_type(path, "string", other);
                None
            }
        }
    }

    /// A required nonempty identifier string.
    pub fn ident(&mut self, obj: &Doc, path: &str, key: &str) -> Option<String> {
        let v = self.req(obj, path, key)?;
        let s = self.string(v, &join(path, key))?;
        if s.is_empty() {
            self.report(Code::E102, &join(path, key), format!("`{key}` must be nonempty"));
            return None;
        }
        Some(s)
    }

    pub fn opt_string(&mut self, obj: &Doc, path: &str, key: &str) -> Option<String> {
        let v = self.opt(obj, path, key)?;
        self.string(v, &join(path, key))
    }

    pub fn number(&mut self, doc: &Doc, path: &str) -> Option<f64> {
        match doc {
            Doc::Number(n) => Some(*n),
            other => {
                self.wrong_type(path, "number", other);
                None
            }
        }
    }

    pub fn boolean(&mut self, doc: &Doc, path: &str) -> Option<bool> {
        match doc {
            Doc::Bool(b) => Some(*b),
            other => {
                self.wrong_type(path, "boolean", other);
                None
            }
        }
    }

    /// Nonnegative integer (milliseconds, indices).
    pub fn uint(&mut self, doc: &Doc, path: &str) -> Option<u64> {
        let n = self.number(doc, path)?;
        if n >= 0.0 && n == libm::trunc(n) && n <= 9.0e15 {
            Some(n as u64)
        } else {
            self.report(Code::E103, path, format!("expected nonnegative integer, found {n}"));
            None
        }
    }

    pub fn vec3(&mut self, doc: &Doc, path: &str) -> Option<Vec3> {
        self.object(doc, path)?;
        let x = self.req(doc, path, "x").and_then(|v| self.number(v, &join(path, "x")));
        let y = self.req(doc, path, "y").and_then(|v| self.number(v, &join(path, "y")));
        let z = self.req(doc, path, "z").and_then(|v| self.number(v, &join(path, "z")));
        Some(Vec3::new(x?, y?, z?))
    }

    pub fn quat(&mut self, doc: &Doc, path: &str) -> Option<Quat> {
        self.object(doc, path)?;
        let mut c = [0.0; 4];
        let mut ok = true;
        for (i, k) in ["x", "y", "z", "w"].iter().enumerate() {
            match self.req(doc, path, k).and_then(|v| self.number(v, &join(path, k))) {
                Some(n) => c[i] = n,
                None => ok = false,
            }
        }
        ok.then_some(Quat { x: c[0], y: c[1], z: c[2], w: c[3] })
    }

    /// Reads a list, applying `item` to each element.
    pub fn list<T>(
        &mut self,
        obj: &Doc,
        path: &str,
        key: &str,
        required: bool,
        mut item: impl FnMut(&mut Self, &Doc, &str) -> Option<T>,
    ) -> Vec<T> {
        let Some(v) = self.field(obj, path, key, required) else { return Vec::new() };
        let p = join(path, key);
        let Some(items) = self.array(v, &p) else { return Vec::new() };
        items.iter().enumerate().filter_map(|(i, d)| item(self, d, &index(&p, i))).collect()
    }
}
