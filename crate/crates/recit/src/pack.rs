//! Reading a story pack directory into a [`StoryPack`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use recit_core::binding::{parse_bindings, parse_cards};
use recit_core::data::Dataset;
use recit_core::narration::parse_narrations;
use recit_core::story::{parse_manifest, parse_scene_spec, Located, MeshRef, StoryPack};
use recit_core::{Code, Diagnostic};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "story.json";

fn unreadable(file: &str, e: &std::io::Error) -> Diagnostic {
    Diagnostic::new(Code::E201, format!("cannot read file: {e}")).in_file(file)
}

/// Parses a CSV file (header row required) into a typed dataset.
pub fn load_dataset(path: &Path, dataset_id: &str) -> Result<Dataset, Diagnostic> {
    let label = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| unreadable(&label, &e))?;
    parse_csv(&bytes, dataset_id).map_err(|d| d.in_file(label))
}

pub fn parse_csv(bytes: &[u8], dataset_id: &str) -> Result<Dataset, Diagnostic> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Diagnostic::new(Code::E201, format!("unreadable CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Diagnostic::new(Code::E201, format!("unreadable CSV record: {e}")))?;
        records.push(rec.iter().map(str::to_string).collect());
    }
    Dataset::from_records(dataset_id, header, records)
}

struct Loader {
    root: PathBuf,
    diags: Vec<Diagnostic>,
    hasher: Sha256,
}

impl Loader {
    fn read(&mut self, rel: &str) -> Option<Vec<u8>> {
        match std::fs::read(self.root.join(rel)) {
            Ok(bytes) => {
                self.hasher.update((rel.len() as u64).to_le_bytes());
                self.hasher.update(rel.as_bytes());
                self.hasher.update((bytes.len() as u64).to_le_bytes());
                self.hasher.update(&bytes);
                Some(bytes)
            }
            Err(e) => {
                self.diags.push(unreadable(rel, &e));
                None
            }
        }
    }

    fn parsed<T>(&mut self, r: Result<T, Vec<Diagnostic>>) -> Option<T> {
        r.map_err(|mut d| self.diags.append(&mut d)).ok()
    }
}

/// Loads every document a pack's manifest lists. Parse and IO problems
/// are returned together; semantic checks are left to the validator.
pub fn load_pack(dir: &Path) -> Result<StoryPack, Vec<Diagnostic>> {
    let mut l = Loader { root: dir.to_path_buf(), diags: Vec::new(), hasher: Sha256::new() };
    let bytes = l.read(MANIFEST_FILE).ok_or_else(|| l.diags.clone())?;
    let manifest = parse_manifest(&bytes, MANIFEST_FILE)?;
    let mut pack = StoryPack::from_scenes(manifest.clone(), Vec::new());

    for file in &manifest.scenes {
        if let Some(b) = l.read(file) {
            if let Some(s) = l.parsed(parse_scene_spec(&b, file)) {
                pack.scenes.push(Located::new(file.clone(), "", s));
            }
        }
    }
    for (i, d) in manifest.datasets.iter().enumerate() {
        let Some(b) = l.read(&d.path) else { continue };
        let ds = parse_csv(&b, &d.dataset_id)
            .and_then(|ds| ds.tag_columns(&d.tags).map_err(|e| {
                let path = format!("datasets[{i}].tags.{}", e.path);
                e.with_path(path)
            }));
        match ds {
            Ok(ds) => pack.datasets.push(Located::new(d.path.clone(), format!("datasets[{i}]"), Arc::new(ds))),
            Err(e) if e.code == Code::E204 || e.code == Code::E205 => l.diags.push(e.in_file(MANIFEST_FILE)),
            Err(e) => l.diags.push(e.in_file(d.path.clone())),
        }
    }
    for file in &manifest.bindings {
        if let Some(b) = l.read(file) {
            for (i, item) in l.parsed(parse_bindings(&b, file)).into_iter().flatten().enumerate() {
                pack.bindings.push(Located::new(file.clone(), format!("[{i}]"), item));
            }
        }
    }
    for file in &manifest.cards {
        if let Some(b) = l.read(file) {
            for (i, item) in l.parsed(parse_cards(&b, file)).into_iter().flatten().enumerate() {
                pack.cards.push(Located::new(file.clone(), format!("[{i}]"), item));
            }
        }
    }
    for file in &manifest.narrations {
        if let Some(b) = l.read(file) {
            for (i, item) in l.parsed(parse_narrations(&b, file)).into_iter().flatten().enumerate() {
                pack.narrations.push(Located::new(file.clone(), format!("[{i}]"), item));
            }
        }
    }
    for path in &manifest.meshes {
        // Missing meshes are a validation finding, not a load failure.
        let present = dir.join(path).is_file();
        if present {
            l.read(path);
        }
        pack.meshes.push(MeshRef { path: path.clone(), present });
    }

    if !l.diags.is_empty() {
        return Err(l.diags);
    }
    pack.pack_hash = hex::encode(l.hasher.finalize());
    Ok(pack)
}

/// Load diagnostics if loading fails, otherwise the validator's findings.
pub fn validate_pack(dir: &Path) -> Vec<Diagnostic> {
    match load_pack(dir) {
        Ok(pack) => recit_core::story::validate_story(&pack),
        Err(d) => d,
    }
}
