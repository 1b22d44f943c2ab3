//! Filesystem, network and process surface for `recit-core`: story pack
//! loading, OBJ and WAV codecs, narration synthesis, trace replay and the
//! preview service.

pub mod obj;
pub mod pack;
pub mod service;
pub mod trace;
pub mod tts;
pub mod wav;

pub use pack::{load_pack, validate_pack};
pub use trace::{run_trace, RunError};
