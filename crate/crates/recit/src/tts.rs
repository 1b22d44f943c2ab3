//! Narration synthesis: a deterministic sine stub and a live HTTP speech
//! client, both writing through a content-addressed clip cache.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use recit_core::narration::NarrationScript;
use recit_core::story::TtsConfig;
use recit_core::{Code, Diagnostic};
use sha2::{Digest, Sha256};

use crate::wav::{self, Pcm, SAMPLE_RATE};

pub const KEY_ENV: &str = "RECIT_TTS_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/audio/speech";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini-tts";
pub const DEFAULT_VOICE: &str = "alloy";
pub const STUB_HZ: f64 = 440.0;
pub const STUB_AMPLITUDE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    pub voice: String,
    pub key: String,
}

impl LiveConfig {
    /// Fills gaps in the pack's settings with defaults and reads the key
    /// from the environment.
    pub fn from_env(cfg: &TtsConfig) -> Result<LiveConfig, Diagnostic> {
        let key = std::env::var(KEY_ENV).ok().filter(|k| !k.trim().is_empty());
        let key = key.ok_or_else(|| Diagnostic::new(Code::E603, format!("{KEY_ENV} is not set")))?;
        Ok(LiveConfig {
            endpoint: cfg.endpoint.clone().unwrap_or_else(|| DEFAULT_ENDPOINT.into()),
            model: cfg.model.clone().unwrap_or_else(|| DEFAULT_MODEL.into()),
            voice: cfg.voice.clone().unwrap_or_else(|| DEFAULT_VOICE.into()),
            key,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    Stub,
    Live(LiveConfig),
}

impl Engine {
    pub fn kind(&self) -> &'static str {
        match self {
            Engine::Stub => "stub",
            Engine::Live(_) => "live",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarrationClip {
    pub narration_id: String,
    pub wav: Vec<u8>,
    pub duration_ms: u64,
    pub content_hash: String,
}

pub fn content_hash(script: &NarrationScript, engine: &str) -> String {
    hex::encode(Sha256::digest(script.content_key(engine).as_bytes()))
}

/// The stub tone: `duration_ms` worth of a 440 Hz sine at half scale.
pub fn stub_pcm(duration_ms: u64) -> Pcm {
    let n = (duration_ms as f64 * SAMPLE_RATE as f64 / 1000.0).round() as usize;
    let w = 2.0 * std::f64::consts::PI * STUB_HZ / SAMPLE_RATE as f64;
    let samples = (0..n).map(|i| (STUB_AMPLITUDE * i16::MAX as f64 * (w * i as f64).sin()).round() as i16).collect();
    Pcm { sample_rate: SAMPLE_RATE, channels: 1, samples }
}

fn live_pcm(script: &NarrationScript, cfg: &LiveConfig) -> Result<Pcm, Diagnostic> {
    let fail = |msg: String| Diagnostic::new(Code::E602, msg);
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let body = serde_json::json!({
        "model": cfg.model,
        "voice": cfg.voice,
        "input": script.text,
        "instructions": script.voice_prompt,
        "response_format": "wav",
    });
    let mut resp = agent
        .post(&cfg.endpoint)
        .header("Authorization", &format!("Bearer {}", cfg.key))
        .send_json(&body)
        .map_err(|e| fail(format!("request to {} failed: {e}", cfg.endpoint)))?;
    let status = resp.status().as_u16();
    let bytes = resp.body_mut().with_config().limit(256 << 20).read_to_vec().map_err(|e| fail(format!("reading response: {e}")))?;
    if status != 200 {
        return Err(fail(format!("status {status}: {}", String::from_utf8_lossy(&bytes))));
    }
    let pcm = wav::decode(&bytes).map_err(|e| fail(format!("unusable audio: {e}")))?;
    Ok(pcm.to_mono(SAMPLE_RATE))
}

/// Clip files under `<dir>/<content_hash>.wav`. Concurrent requests for
/// the same hash synthesize once; the others wait and read the file.
#[derive(Debug)]
pub struct ClipCache {
    dir: PathBuf,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ClipCache {
    pub fn new(dir: impl Into<PathBuf>) -> ClipCache {
        ClipCache { dir: dir.into(), inflight: Mutex::new(HashMap::new()) }
    }

    /// The cache a pack uses: `<pack>/.recit/audio`.
    pub fn for_pack(pack_dir: &Path) -> ClipCache {
        ClipCache::new(pack_dir.join(".recit").join("audio"))
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.wav"))
    }

    fn read_clip(&self, script: &NarrationScript, hash: &str) -> Option<NarrationClip> {
        let wav = std::fs::read(self.path_for(hash)).ok()?;
        let duration_ms = wav::decode(&wav).ok()?.duration_ms();
        Some(NarrationClip { narration_id: script.narration_id.clone(), wav, duration_ms, content_hash: hash.into() })
    }

    /// Returns the clip and whether it came from the cache.
    pub fn synthesize(&self, script: &NarrationScript, engine: &Engine) -> Result<(NarrationClip, bool), Diagnostic> {
        script.check()?;
        let hash = content_hash(script, engine.kind());
        let gate = self.inflight.lock().unwrap().entry(hash.clone()).or_default().clone();
        let _held = gate.lock().unwrap();
        if let Some(clip) = self.read_clip(script, &hash) {
            return Ok((clip, true));
        }
        let pcm = match engine {
            Engine::Stub => stub_pcm(script.duration_ms()),
            Engine::Live(cfg) => live_pcm(script, cfg)?,
        };
        let bytes = wav::encode(&pcm);
        let io = |e: std::io::Error| Diagnostic::new(Code::E201, format!("writing clip cache: {e}"));
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        let tmp = self.dir.join(format!("{hash}.wav.tmp"));
        std::fs::write(&tmp, &bytes).map_err(io)?;
        std::fs::rename(&tmp, self.path_for(&hash)).map_err(io)?;
        let clip = NarrationClip {
            narration_id: script.narration_id.clone(),
            duration_ms: pcm.duration_ms(),
            wav: bytes,
            content_hash: hash,
        };
        Ok((clip, false))
    }
}
