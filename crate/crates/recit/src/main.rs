use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use recit::obj::{read_obj, write_obj};
use recit::service::{self, AppState, DEFAULT_BIND};
use recit::trace::{load_context, run_trace};
use recit::tts::{ClipCache, Engine, LiveConfig};
use recit_core::diag::has_errors;
use recit_core::mesh::{bake_vertex_lighting, decimate_mesh, DirectionalLight};
use recit_core::{Code, Diagnostic, Severity, Vec3};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "recit", version, about = "Validate, replay and serve immersive data-story packs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print diagnostics for a story pack.
    Validate { pack: PathBuf },
    /// Replay an interaction trace and emit the effect log.
    Run {
        pack: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Write the log here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the preview API.
    Serve {
        pack: PathBuf,
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: String,
    },
    /// Simplify an OBJ mesh.
    Decimate {
        input: PathBuf,
        #[arg(long)]
        ratio: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bake directional lights into vertex colors.
    Bake {
        input: PathBuf,
        #[arg(long)]
        lights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize every narration clip into the pack's cache.
    Narrate {
        pack: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Stub)]
        engine: EngineArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Stub,
    Live,
}

const OK: u8 = 0;
const SEMANTIC: u8 = 1;
const IO: u8 = 2;

fn report(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

/// Exit status for a failed pack load: pure IO problems are 2.
fn load_failure(diags: &[Diagnostic]) -> u8 {
    report(diags);
    if diags.iter().all(|d| d.code == Code::E201) {
        IO
    } else {
        SEMANTIC
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), u8> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path)).map_err(|e| {
        eprintln!("error: writing {}: {e}", path.display());
        IO
    })
}

fn read_text(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: reading {}: {e}", path.display());
        IO
    })
}

fn validate(pack: &Path) -> Result<(), u8> {
    let diags = match recit::load_pack(pack) {
        Ok(p) => recit_core::story::validate_story(&p),
        Err(d) => return Err(load_failure(&d)),
    };
    report(&diags);
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    println!("{errors} error(s), {} warning(s)", diags.len() - errors);
    if has_errors(&diags) {
        Err(SEMANTIC)
    } else {
        Ok(())
    }
}

fn run(pack: &Path, trace: &Path, out: Option<&Path>) -> Result<(), u8> {
    let log = run_trace(pack, trace).map_err(|e| {
        report(&e.diagnostics());
        e.exit_code() as u8
    })?;
    match out {
        Some(p) => write_atomic(p, log.as_bytes()),
        None => {
            print!("{log}");
            Ok(())
        }
    }
}

fn serve(pack: &Path, bind: &str) -> Result<(), u8> {
    let (ctx, warnings) = load_context(pack).map_err(|d| load_failure(&d))?;
    report(&warnings);
    let rt = tokio::runtime::Runtime::new().map_err(|e| {
        eprintln!("error: {e}");
        IO
    })?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| {
            eprintln!("error: binding {bind}: {e}");
            IO
        })?;
        eprintln!("serving {} on http://{}", pack.display(), listener.local_addr().map_err(|_| IO)?);
        service::serve(listener, AppState::new(pack, ctx, warnings)).await.map_err(|e| {
            eprintln!("error: {e}");
            IO
        })
    })
}

fn semantic(d: Diagnostic) -> u8 {
    report(&[d]);
    SEMANTIC
}

fn decimate(input: &Path, ratio: f64, out: &Path) -> Result<(), u8> {
    let mesh = read_obj(&read_text(input)?).map_err(|d| semantic(d.in_file(input.display().to_string())))?;
    let result = decimate_mesh(&mesh, ratio).map_err(semantic)?;
    eprintln!("{} -> {} triangles", mesh.triangle_count(), result.triangle_count());
    write_atomic(out, write_obj(&result).as_bytes())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LightRig {
    #[serde(default)]
    ambient: Option<Vec3>,
    lights: Vec<DirectionalLight>,
}

fn bake(input: &Path, lights: &Path, out: &Path) -> Result<(), u8> {
    let mesh = read_obj(&read_text(input)?).map_err(|d| semantic(d.in_file(input.display().to_string())))?;
    let rig: LightRig = serde_json::from_str(&read_text(lights)?).map_err(|e| {
        eprintln!("error: {}: {e}", lights.display());
        IO
    })?;
    let lit = bake_vertex_lighting(&mesh, &rig.lights, rig.ambient.unwrap_or(Vec3::ZERO)).map_err(semantic)?;
    write_atomic(out, write_obj(&lit).as_bytes())
}

fn narrate(pack_dir: &Path, engine: EngineArg) -> Result<(), u8> {
    let pack = recit::load_pack(pack_dir).map_err(|d| load_failure(&d))?;
    let engine = match engine {
        EngineArg::Stub => Engine::Stub,
        EngineArg::Live => Engine::Live(LiveConfig::from_env(&pack.manifest.tts).map_err(semantic)?),
    };
    let cache = ClipCache::for_pack(pack_dir);
    for n in &pack.narrations {
        let (clip, hit) = cache.synthesize(&n.item, &engine).map_err(|d| semantic(d.at(n.file.clone(), n.path.clone())))?;
        println!("{} {}ms {} {}", clip.narration_id, clip.duration_ms, clip.content_hash, if hit { "cached" } else { "synthesized" });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { IO } else { OK });
        }
    };
    let result = match &cli.command {
        Cmd::Validate { pack } => validate(pack),
        Cmd::Run { pack, trace, out } => run(pack, trace, out.as_deref()),
        Cmd::Serve { pack, bind } => serve(pack, bind),
        Cmd::Decimate { input, ratio, out } => decimate(input, *ratio, out),
        Cmd::Bake { input, lights, out } => bake(input, lights, out),
        Cmd::Narrate { pack, engine } => narrate(pack, *engine),
    };
    ExitCode::from(result.err().unwrap_or(OK))
}
