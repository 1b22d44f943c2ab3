//! Coded diagnostics shared by every stage of the pipeline.

use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};

macro_rules! codes {
    ($($name:ident => $doc:literal),* $(,)?) => {
        /// Every diagnostic code the engine can emit. `W*` codes are
        /// warnings, everything else is an error.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum Code {
            $(#[doc = $doc] $name,)*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[$(Code::$name),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Code::$name => stringify!($name),)*
                }
            }

            pub fn summary(self) -> &'static str {
                match self {
                    $(Code::$name => $doc,)*
                }
            }
        }
    };
}

codes! {
    E001 => "duplicate scene_id",
    E002 => "duplicate object_id in scene",
    E003 => "duplicate event_id in scene",
    E004 => "reference to unknown event, action target or object",
    E005 => "reference to unknown scene",
    E006 => "binding references unknown dataset column or attribute path",
    E007 => "card template placeholder references unknown column",
    E008 => "narration id unresolved",
    E009 => "mesh asset file missing",
    E010 => "manifest initial_scene unresolved",
    W101 => "scene unreachable from initial scene",
    W102 => "narrative event can never fire",
    E101 => "malformed syntax",
    E102 => "missing required field",
    E103 => "wrong field type or value",
    E104 => "unknown trigger or action kind",
    E201 => "unreadable file",
    E202 => "ragged row",
    E203 => "duplicate header name",
    E204 => "unknown column",
    E205 => "conflicting column tags",
    E206 => "predicate parse error",
    E207 => "predicate type mismatch",
    E208 => "grouping by measure column",
    E301 => "duplicate object_id",
    E302 => "unknown object",
    E401 => "binding expression syntax error",
    E402 => "unknown function",
    E403 => "function arity mismatch",
    E404 => "null or missing cell",
    E405 => "division by zero",
    E406 => "scale with empty input range",
    E407 => "row selector did not resolve to exactly one row",
    E408 => "placeholder column missing from row",
    E501 => "asset referenced by initial scene missing",
    E502 => "event older than runtime clock",
    E503 => "action references object missing at runtime",
    E504 => "snapshot does not match pack",
    E601 => "empty narration text",
    E602 => "live speech API failure",
    E603 => "speech API credential missing",
    E604 => "non-manifold mesh",
    E605 => "empty mesh",
    E606 => "mesh has no normals",
    E701 => "malformed or non-monotone trace",
}

impl Code {
    pub fn severity(self) -> Severity {
        if self.as_str().starts_with('W') {
            Severity::Warning
        } else {
            Severity::Error
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A coded finding with a `file` + document `path` location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: Code,
    pub severity: Severity,
    pub file: String,
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: code.severity(),
            file: String::new(),
            path: String::new(),
            message: message.into(),
        }
    }

    pub fn at(mut self, file: impl Into<String>, path: impl Into<String>) -> Self {
        self.file = file.into();
        self.path = path.into();
        self
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.path = path.into();
        self
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = file.into();
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:path` as printed by the CLI.
    pub fn location(&self) -> String {
        match (self.file.is_empty(), self.path.is_empty()) {
            (true, true) => String::new(),
            (false, true) => self.file.clone(),
            (true, false) => self.path.clone(),
            (false, false) => alloc::format!("{}:{}", self.file, self.path),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        let loc = self.location();
        if loc.is_empty() {
            write!(f, "{sev}[{}]: {}", self.code, self.message)
        } else {
            write!(f, "{sev}[{}] {loc}: {}", self.code, self.message)
        }
    }
}

impl core::error::Error for Diagnostic {}

impl From<Diagnostic> for String {
    fn from(d: Diagnostic) -> String {
        d.to_string()
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn severity_follows_code_prefix() {
        for code in Code::ALL {
            let expected = if code.as_str().starts_with('W') { Severity::Warning } else { Severity::Error };
            assert_eq!(code.severity(), expected);
        }
        assert_eq!(Code::W101.severity(), Severity::Warning);
    }

    #[test]
    fn display_includes_location() {
        let d = Diagnostic::new(Code::E005, "unknown scene `x`").at("scenes/a.json", "narrative_sequence[0].next_scene");
        assert_eq!(
            d.to_string(),
            "error[E005] scenes/a.json:narrative_sequence[0].next_scene: unknown scene `x`"
        );
    }
}
