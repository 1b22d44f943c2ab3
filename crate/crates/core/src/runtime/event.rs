use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::geom::{Ray, Vec3};

/// Simulated user input. As JSON:
/// `{"t_ms": 1200, "event": {"kind": "gaze", "ray": {...}, "dwell_ms": 800}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub t_ms: u64,
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    Gaze {
        ray: Ray,
        #[serde(default)]
        dwell_ms: u64,
    },
    /// Selects `target` directly, or whatever `ray` hits.
    GestureSelect {
        #[serde(default)]
        target: Option<String>,
        #[serde(default)]
        ray: Option<Ray>,
    },
    Locomotion { to: Vec3 },
    Voice { command: String },
    Tick,
}

impl InteractionEvent {
    pub fn tick(t_ms: u64) -> Self {
        InteractionEvent { t_ms, event: EventKind::Tick }
    }
}
