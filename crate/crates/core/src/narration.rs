//! Narration scripts: `narration/*.json` holds a list of
//! `{narration_id, text, voice_prompt?, speed?, anchor?}`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diag::{Code, Diagnostic};
use crate::doc::{join, Doc, Reader};

/// Words per second when a script does not say.
pub const DEFAULT_SPEED: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrationScript {
    pub narration_id: String,
    pub text: String,
    pub voice_prompt: String,
    pub speed: f64,
    pub anchor: Option<String>,
}

impl NarrationScript {
    pub fn new(narration_id: &str, text: &str) -> Self {
        NarrationScript {
            narration_id: narration_id.into(),
            text: text.into(),
            voice_prompt: String::new(),
            speed: DEFAULT_SPEED,
            anchor: None,
        }
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    /// `round(1000 · words / speed)`, halves away from zero.
    pub fn duration_ms(&self) -> u64 {
        libm::round(1000.0 * self.word_count() as f64 / self.speed) as u64
    }

    pub fn check(&self) -> Result<(), Diagnostic> {
        if self.text.trim().is_empty() {
            return Err(Diagnostic::new(Code::E601, format!("narration `{}` has empty text", self.narration_id)));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Diagnostic::new(Code::E103, format!("speed must be positive, found {}", self.speed)));
        }
        Ok(())
    }

    /// Bytes hashed to key the clip cache: every field that changes the
    /// audio, plus the engine name.
    pub fn content_key(&self, engine: &str) -> String {
        format!(
            "recit-narration-v1\n{engine}\n{}\n{}\n{}",
            crate::fmt::canonical_number(self.speed),
            self.voice_prompt,
            self.text
        )
    }
}

pub fn parse_narrations(bytes: &[u8], file: &str) -> Result<Vec<NarrationScript>, Vec<Diagnostic>> {
    let doc = Doc::parse(bytes).map_err(|d| alloc::vec![d.in_file(file)])?;
    let mut r = Reader::new(file);
    let mut out = Vec::new();
    for (i, d) in r.array(&doc, "").unwrap_or_default().iter().enumerate() {
        let p = format!("[{i}]");
        if r.object(d, &p).is_none() {
            continue;
        }
        let id = r.ident(d, &p, "narration_id");
        let text = r.req(d, &p, "text").and_then(|v| r.string(v, &join(&p, "text")));
        let voice_prompt = r.opt_string(d, &p, "voice_prompt").unwrap_or_default();
        let speed = match r.opt(d, &p, "speed") {
            None => Some(DEFAULT_SPEED),
            Some(v) => r.number(v, &join(&p, "speed")),
        };
        let anchor = r.opt_string(d, &p, "anchor");
        let (Some(id), Some(text), Some(speed)) = (id, text, speed) else { continue };
        let s = NarrationScript { narration_id: id, text, voice_prompt, speed, anchor };
        match s.check() {
            Ok(()) => out.push(s),
            Err(e) => {
                let field = if e.code == Code::E601 { "text" } else { "speed" };
                r.report(e.code, &join(&p, field), e.message);
            }
        }
    }
    if r.diags.is_empty() {
        Ok(out)
    } else {
        Err(r.diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_words_at_default_speed() {
        let s = NarrationScript::new("n", "The army crossed the Niemen");
        assert_eq!(s.word_count(), 5);
        assert_eq!(s.duration_ms(), 2000);
    }

    #[test]
    fn parse_and_reject_empty() {
        let ok = parse_narrations(br#"[{"narration_id":"a","text":"one two","speed":4}]"#, "n.json").unwrap();
        assert_eq!(ok[0].duration_ms(), 500);
        let d = parse_narrations(br#"[{"narration_id":"a","text":"   "}]"#, "n.json").unwrap_err();
        assert_eq!((d[0].code, d[0].path.as_str()), (Code::E601, "[0].text"));
    }
}
