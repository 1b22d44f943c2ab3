//! JSON-lines interaction traces and effect logs.

use std::path::Path;
use std::sync::Arc;

use recit_core::diag::has_errors;
use recit_core::runtime::{Effect, InteractionEvent, Runtime, StoryContext};
use recit_core::{Code, Diagnostic};

use crate::pack::load_pack;

/// Parses one `{t_ms, event}` record per nonblank line, requiring
/// non-decreasing timestamps.
pub fn parse_trace(text: &str, file: &str) -> Result<Vec<InteractionEvent>, Diagnostic> {
    let mut out: Vec<InteractionEvent> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("line {}", i + 1);
        let ev: InteractionEvent = serde_json::from_str(line)
            .map_err(|e| Diagnostic::new(Code::E701, format!("malformed record: {e}")).at(file, at.clone()))?;
        if let Some(prev) = out.last() {
            if ev.t_ms < prev.t_ms {
                return Err(Diagnostic::new(Code::E701, format!("t_ms {} is before {}", ev.t_ms, prev.t_ms)).at(file, at));
            }
        }
        out.push(ev);
    }
    Ok(out)
}

pub fn log_lines(effects: &[Effect]) -> String {
    let mut s = String::new();
    for e in effects {
        s.push_str(&e.to_canonical_json());
        s.push('\n');
    }
    s
}

#[derive(Debug)]
pub enum RunError {
    /// The pack failed to load or validate.
    Invalid(Vec<Diagnostic>),
    /// The trace is malformed or unreadable.
    Trace(Diagnostic),
    /// A semantic failure during replay.
    Runtime(Diagnostic),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) | RunError::Runtime(_) => 1,
            RunError::Trace(_) => 2,
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            RunError::Invalid(d) => d.clone(),
            RunError::Trace(d) | RunError::Runtime(d) => vec![d.clone()],
        }
    }
}

/// Loads and validates a pack, failing on any error-severity finding.
pub fn load_context(pack_dir: &Path) -> Result<(Arc<StoryContext>, Vec<Diagnostic>), Vec<Diagnostic>> {
    let pack = load_pack(pack_dir)?;
    let (ctx, warnings) = StoryContext::from_pack(&pack)?;
    debug_assert!(!has_errors(&warnings));
    Ok((Arc::new(ctx), warnings))
}

/// Replays `events` from a fresh runtime, returning every effect.
pub fn replay(ctx: Arc<StoryContext>, events: &[InteractionEvent]) -> Result<Vec<Effect>, Diagnostic> {
    let (mut rt, mut effects) = Runtime::load(ctx)?;
    for ev in events {
        effects.extend(rt.inject(ev)?);
    }
    Ok(effects)
}

/// The effect log for a pack and trace file.
pub fn run_trace(pack_dir: &Path, trace_path: &Path) -> Result<String, RunError> {
    let (ctx, _) = load_context(pack_dir).map_err(RunError::Invalid)?;
    let label = trace_path.display().to_string();
    let text = std::fs::read_to_string(trace_path)
        .map_err(|e| RunError::Trace(Diagnostic::new(Code::E701, format!("cannot read trace: {e}")).in_file(label.clone())))?;
    let events = parse_trace(&text, &label).map_err(RunError::Trace)?;
    let effects = replay(ctx, &events).map_err(RunError::Runtime)?;
    Ok(log_lines(&effects))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_and_wellformed() {
        let ok = "{\"t_ms\":0,\"event\":{\"kind\":\"tick\"}}\n\n{\"t_ms\":0,\"event\":{\"kind\":\"voice\",\"command\":\"go\"}}\n";
        assert_eq!(parse_trace(ok, "t").unwrap().len(), 2);
        let back = "{\"t_ms\":5,\"event\":{\"kind\":\"tick\"}}\n{\"t_ms\":4,\"event\":{\"kind\":\"tick\"}}\n";
        let e = parse_trace(back, "t").unwrap_err();
        assert_eq!((e.code, e.path.as_str()), (Code::E701, "line 2"));
        let junk = parse_trace("{\"t_ms\":1,\"event\":{\"kind\":\"blink\"}}", "t").unwrap_err();
        assert_eq!(junk.code, Code::E701);
    }
}
