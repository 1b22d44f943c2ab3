//! HTTP + WebSocket preview service. Each session owns one runtime,
//! driven by a single command loop; effects fan out to stream
//! subscribers before the HTTP reply is sent.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use recit_core::runtime::{Effect, InteractionEvent, Runtime, StoryContext};
use recit_core::story::Mode;
use recit_core::{Code, Diagnostic};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::{broadcast, mpsc, oneshot};

pub const DEFAULT_BIND: &str = "127.0.0.1:7341";
/// Effects buffered per stream subscriber before it is dropped.
pub const STREAM_BUFFER: usize = 1024;
pub const DEFAULT_PAGE: usize = 100;
pub const MAX_PAGE: usize = 1000;

type Reply<T> = oneshot::Sender<T>;

enum Command {
    Inject(InteractionEvent, Reply<Result<Vec<Effect>, Diagnostic>>),
    Step(u64, Reply<Vec<Effect>>),
    Snapshot(Reply<String>),
    Restore(String, Reply<Result<(), Diagnostic>>),
    State(Reply<Value>),
}

struct Session {
    commands: mpsc::Sender<Command>,
    stream: broadcast::Sender<Arc<str>>,
}

pub struct AppState {
    pack_dir: PathBuf,
    ctx: Arc<StoryContext>,
    story: Value,
    sessions: RwLock<BTreeMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(pack_dir: &Path, ctx: Arc<StoryContext>, diagnostics: Vec<Diagnostic>) -> Arc<AppState> {
        let story = json!({ "graph": ctx.graph, "diagnostics": diagnostics });
        Arc::new(AppState {
            pack_dir: pack_dir.to_path_buf(),
            ctx,
            story,
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn snapshot_dir(&self) -> PathBuf {
        self.pack_dir.join(".recit").join("snapshots")
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }
}

fn run_session(mut rt: Runtime, mut rx: mpsc::Receiver<Command>, stream: broadcast::Sender<Arc<str>>) {
    let publish = move |effects: &[Effect]| {
        for e in effects {
            // No receivers is fine.
            let _ = stream.send(e.to_canonical_json().into());
        }
    };
    tokio::spawn(async move {
        while let Some(cmd) = rx.recv().await {
            match cmd {
                Command::Inject(ev, reply) => {
                    let r = rt.inject(&ev);
                    if let Ok(fx) = &r {
                        publish(fx);
                    }
                    let _ = reply.send(r);
                }
                Command::Step(dt, reply) => {
                    let fx = rt.step(dt);
                    publish(&fx);
                    let _ = reply.send(fx);
                }
                Command::Snapshot(reply) => {
                    let _ = reply.send(rt.snapshot());
                }
                Command::Restore(blob, reply) => {
                    let r = Runtime::restore(rt.context().clone(), &blob).map(|restored| rt = restored);
                    let _ = reply.send(r);
                }
                Command::State(reply) => {
                    let _ = reply.send(serde_json::to_value(rt.state()).expect("state serializes"));
                }
            }
        }
    });
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError { status, body: json!({ "error": { "message": message.into() } }) }
    }

    fn bad_request(e: impl std::fmt::Display) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}"))
    }
}

impl From<Diagnostic> for ApiError {
    fn from(d: Diagnostic) -> ApiError {
        let status = match d.code {
            Code::E502 => StatusCode::CONFLICT,
            Code::E504 => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError { status, body: json!({ "error": d }) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_text(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// `{"effects":[...]}` in canonical effect form, matching the stream.
pub fn effects_body(effects: &[Effect]) -> String {
    let items: Vec<String> = effects.iter().map(Effect::to_canonical_json).collect();
    format!("{{\"effects\":[{}]}}", items.join(","))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::bad_request)
}

async fn call<T>(s: &Session, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, ApiError> {
    let (tx, rx) = oneshot::channel();
    let gone = || ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session loop stopped");
    s.commands.send(make(tx)).await.map_err(|_| gone())?;
    rx.await.map_err(|_| gone())
}

async fn get_story(State(app): State<Arc<AppState>>) -> Response {
    axum::Json(app.story.clone()).into_response()
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> ApiResult {
    let sessions: Vec<(String, Arc<Session>)> =
        app.sessions.read().unwrap().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let mut out = Vec::new();
    for (id, s) in sessions {
        let state = call(&s, Command::State).await?;
        out.push(json!({ "session_id": id, "current_scene": state["current_scene"], "clock_ms": state["clock_ms"] }));
    }
    Ok(axum::Json(json!({ "sessions": out })).into_response())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NewSession {
    #[serde(default)]
    mode: Option<Mode>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: NewSession = if body.iter().all(u8::is_ascii_whitespace) { NewSession::default() } else { parse_body(&body)? };
    let mode = req.mode.unwrap_or(app.ctx.mode_default);
    let (rt, effects) = Runtime::load_with_mode(app.ctx.clone(), mode)?;
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let (tx, rx) = mpsc::channel(64);
    let (stream, _) = broadcast::channel(STREAM_BUFFER);
    run_session(rt, rx, stream.clone());
    app.sessions.write().unwrap().insert(id.clone(), Arc::new(Session { commands: tx, stream }));
    let effects = effects_body(&effects);
    let body = format!("{{\"session_id\":{},{}", serde_json::to_string(&id).unwrap(), &effects[1..]);
    Ok(json_text(StatusCode::CREATED, body))
}

async fn get_state(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = app.session(&id)?;
    Ok(axum::Json(call(&s, Command::State).await?).into_response())
}

async fn post_event(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let s = app.session(&id)?;
    let ev: InteractionEvent = parse_body(&body)?;
    let effects = call(&s, |r| Command::Inject(ev, r)).await??;
    Ok(json_text(StatusCode::OK, effects_body(&effects)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepBody {
    dt_ms: u64,
}

async fn post_step(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let s = app.session(&id)?;
    let StepBody { dt_ms } = parse_body(&body)?;
    let effects = call(&s, |r| Command::Step(dt_ms, r)).await?;
    Ok(json_text(StatusCode::OK, effects_body(&effects)))
}

async fn post_snapshot(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = app.session(&id)?;
    let blob = call(&s, Command::Snapshot).await?;
    let blob_id = hex::encode(Sha256::digest(blob.as_bytes()));
    let dir = app.snapshot_dir();
    let io = |e: std::io::Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("storing snapshot: {e}"));
    std::fs::create_dir_all(&dir).map_err(io)?;
    std::fs::write(dir.join(format!("{blob_id}.json")), blob).map_err(io)?;
    Ok((StatusCode::CREATED, axum::Json(json!({ "blob_id": blob_id }))).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RestoreBody {
    blob_id: String,
}

async fn post_restore(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let s = app.session(&id)?;
    let RestoreBody { blob_id } = parse_body(&body)?;
    let missing = || ApiError::new(StatusCode::NOT_FOUND, format!("unknown snapshot `{blob_id}`"));
    if blob_id.len() != 64 || !blob_id.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(missing());
    }
    let blob = std::fs::read_to_string(app.snapshot_dir().join(format!("{blob_id}.json"))).map_err(|_| missing())?;
    call(&s, |r| Command::Restore(blob, r)).await??;
    Ok(axum::Json(call(&s, Command::State).await?).into_response())
}

async fn get_dataset(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let ds = app
        .ctx
        .datasets
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown dataset `{id}`")))?;
    let view = recit_core::data::filter_rows(ds, q.get("filter").map_or("true", String::as_str))?;
    let num = |k: &str, d: usize| -> Result<usize, ApiError> {
        q.get(k).map_or(Ok(d), |v| v.parse().map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("bad `{k}`"))))
    };
    let offset = num("offset", 0)?;
    let limit = num("limit", DEFAULT_PAGE)?.min(MAX_PAGE);
    let rows: Vec<Value> =
        view.rows().skip(offset).take(limit).map(|r| Value::Array(r.cells.iter().map(|c| c.to_json()).collect())).collect();
    Ok(axum::Json(json!({
        "dataset_id": id,
        "columns": ds.columns,
        "total": view.len(),
        "offset": offset,
        "limit": limit,
        "rows": rows,
    }))
    .into_response())
}

async fn stream(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, ws: WebSocketUpgrade) -> ApiResult {
    let s = app.session(&id)?;
    // Subscribe before the handshake completes so nothing produced after
    // the client sees the upgrade is missed.
    let rx = s.stream.subscribe();
    Ok(ws.on_upgrade(move |socket| forward(socket, rx)))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<Arc<str>>) {
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                // Lagged subscribers are dropped rather than slowing the session.
                Err(_) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/story", get(get_story))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/step", post(post_step))
        .route("/sessions/{id}/snapshot", post(post_snapshot))
        .route("/sessions/{id}/restore", post(post_restore))
        .route("/sessions/{id}/stream", get(stream))
        .route("/datasets/{id}", get(get_dataset))
        .with_state(app)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, app: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}
