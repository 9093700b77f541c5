//! Deterministic mock implementation of the wire protocol, for offline
//! end-to-end testing.
//!
//! Unrigged responses are pure functions of the request body: captions echo
//! short digests of the image and instruction, generation returns the first
//! option letter found in the prompt. A rig file overrides responses by
//! substring match, first rule wins. Every request lands in a replayable
//! log, and `/v1/stats` exposes an in-flight high-water mark so tests can
//! assert client-side concurrency bounds.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::cache::short_digest;
use crate::error::{Error, Result};
use crate::wire;

/// Which route a rig rule applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RigTarget {
    Caption,
    Generate,
    Any,
}

/// One scripted response: when the incoming instruction/prompt contains
/// `pattern`, answer with `response_text`. Rules are evaluated in file
/// order; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigRule {
    pub applies_to: RigTarget,
    pub pattern: String,
    pub response_text: String,
}

/// Parses the plain-text rig rule list.
///
/// One rule per line: `<caption|generate|any> "<pattern>" => "<response>"`,
/// both strings JSON-quoted. Blank lines and `#` comments are skipped.
pub fn parse_rig_rules(text: &str) -> Result<Vec<RigRule>> {
    let mut rules = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = |line: &str| -> Option<RigRule> {
            let (kind, rest) = line.split_once(char::is_whitespace)?;
            let applies_to = match kind {
                "caption" => RigTarget::Caption,
                "generate" => RigTarget::Generate,
                "any" => RigTarget::Any,
                _ => return None,
            };
            let (pattern, rest) = take_json_string(rest.trim_start())?;
            let rest = rest.trim_start().strip_prefix("=>")?;
            let (response_text, rest) = take_json_string(rest.trim_start())?;
            if !rest.trim().is_empty() {
                return None;
            }
            Some(RigRule {
                applies_to,
                pattern,
                response_text,
            })
        };
        match parse(line) {
            Some(rule) => rules.push(rule),
            None => {
                return Err(Error::Validation(format!(
                    "rig file line {}: expected `<caption|generate|any> \"pattern\" => \"response\"`, got {:?}",
                    lineno + 1,
                    raw
                )))
            }
        }
    }
    Ok(rules)
}

/// Reads one leading JSON string literal, returning it and the remainder.
fn take_json_string(text: &str) -> Option<(String, &str)> {
    let mut stream = serde_json::Deserializer::from_str(text).into_iter::<String>();
    let value = stream.next()?.ok()?;
    Some((value, &text[stream.byte_offset()..]))
}

/// Writes rig rules back to the plain-text format.
pub fn format_rig_rules(rules: &[RigRule]) -> String {
    let mut out = String::new();
    for r in rules {
        let kind = match r.applies_to {
            RigTarget::Caption => "caption",
            RigTarget::Generate => "generate",
            RigTarget::Any => "any",
        };
        out.push_str(kind);
        out.push(' ');
        out.push_str(&serde_json::to_string(&r.pattern).expect("string serializes"));
        out.push_str(" => ");
        out.push_str(&serde_json::to_string(&r.response_text).expect("string serializes"));
        out.push('\n');
    }
    out
}

/// Builds generate-route rules mapping record sentinels (planted in
/// synthetic option texts) to scripted answers, enabling exact
/// expected-accuracy fixtures.
pub fn rig_answers(mapping: &[(String, String)]) -> Result<Vec<RigRule>> {
    let mut seen = std::collections::HashSet::new();
    let mut rules = Vec::with_capacity(mapping.len());
    for (sentinel, response) in mapping {
        if !seen.insert(sentinel.as_str()) {
            return Err(Error::Conflict(format!(
                "sentinel {sentinel:?} rigged more than once"
            )));
        }
        rules.push(RigRule {
            applies_to: RigTarget::Generate,
            pattern: sentinel.clone(),
            response_text: response.clone(),
        });
    }
    Ok(rules)
}

/// One logged request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub route: String,
    pub bearer: Option<String>,
    pub body: serde_json::Value,
}

#[derive(Debug)]
struct MockState {
    rig: Vec<RigRule>,
    fixed_delay: Duration,
    in_flight: AtomicUsize,
    high_water: AtomicUsize,
    caption_requests: AtomicU64,
    generate_requests: AtomicU64,
    seq: AtomicU64,
    log: Mutex<Vec<LogEntry>>,
    log_file: Option<Mutex<std::fs::File>>,
}

impl MockState {
    fn snapshot(&self) -> wire::StatsBody {
        wire::StatsBody {
            in_flight: self.in_flight.load(Ordering::SeqCst),
            high_water_in_flight: self.high_water.load(Ordering::SeqCst),
            caption_requests: self.caption_requests.load(Ordering::SeqCst),
            generate_requests: self.generate_requests.load(Ordering::SeqCst),
        }
    }

    fn record(&self, route: &str, bearer: Option<String>, body: serde_json::Value) {
        let entry = LogEntry {
            seq: self.seq.fetch_add(1, Ordering::SeqCst),
            route: route.to_string(),
            bearer,
            body,
        };
        if let Some(file) = &self.log_file {
            use std::io::Write as _;
            let mut line = serde_json::to_vec(&entry).expect("log entry serializes");
            line.push(b'\n');
            let mut f = file.lock().expect("log file lock");
            let _ = f.write_all(&line);
        }
        self.log.lock().expect("log lock").push(entry);
    }

    fn rigged(&self, target: RigTarget, haystack: &str) -> Option<&str> {
        self.rig
            .iter()
            .find(|r| {
                (r.applies_to == target || r.applies_to == RigTarget::Any)
                    && haystack.contains(&r.pattern)
            })
            .map(|r| r.response_text.as_str())
    }
}

struct InFlightGuard(Arc<MockState>);

impl InFlightGuard {
    fn enter(state: &Arc<MockState>) -> Self {
        let current = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        state.high_water.fetch_max(current, Ordering::SeqCst);
        Self(state.clone())
    }
}

impl Drop for InFlightGuard {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Serve options; `port` 0 binds an ephemeral port.
#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub port: u16,
    pub rig: Vec<RigRule>,
    /// Per-request delay, for concurrency and resume tests only.
    pub fixed_delay_ms: u64,
    /// Optional JSONL request-log path, appended live.
    pub log_path: Option<PathBuf>,
}

/// A running mock server.
pub struct MockHandle {
    addr: SocketAddr,
    state: Arc<MockState>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl MockHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> wire::StatsBody {
        self.state.snapshot()
    }

    pub fn log_entries(&self) -> Vec<LogEntry> {
        self.state.log.lock().expect("log lock").clone()
    }

    /// Stops accepting connections and waits for the server task.
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.task).await;
    }

    /// Blocks until the server exits (used by the CLI's serve command).
    /// The shutdown sender stays alive; dropping it would stop the server.
    pub async fn wait(mut self) {
        let _ = (&mut self.task).await;
    }
}

/// Starts the mock server on `127.0.0.1:<port>`.
pub async fn serve(opts: ServeOptions) -> Result<MockHandle> {
    let log_file = match &opts.log_path {
        Some(path) => {
            let file = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(Error::Io)?;
            Some(Mutex::new(file))
        }
        None => None,
    };
    let state = Arc::new(MockState {
        rig: opts.rig,
        fixed_delay: Duration::from_millis(opts.fixed_delay_ms),
        in_flight: AtomicUsize::new(0),
        high_water: AtomicUsize::new(0),
        caption_requests: AtomicU64::new(0),
        generate_requests: AtomicU64::new(0),
        seq: AtomicU64::new(0),
        log: Mutex::new(Vec::new()),
        log_file,
    });
    let app = Router::new()
        .route(wire::CAPTION_PATH, post(handle_caption))
        .route(wire::GENERATE_PATH, post(handle_generate))
        .route(wire::STATS_PATH, get(handle_stats))
        .route(wire::LOG_PATH, get(handle_log))
        .with_state(state.clone());
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", opts.port))
        .await
        .map_err(|e| Error::Config(format!("bind 127.0.0.1:{}: {e}", opts.port)))?;
    let addr = listener.local_addr().map_err(Error::Io)?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = axum::serve(listener, app).with_graceful_shutdown(async move {
        let _ = rx.await;
    });
    let task = tokio::spawn(async move {
        if let Err(e) = server.await {
            eprintln!("mock server error: {e}");
        }
    });
    Ok(MockHandle {
        addr,
        state,
        shutdown: Some(tx),
        task,
    })
}

fn protocol_error(code: &str, message: String) -> (StatusCode, axum::Json<wire::ErrorBody>) {
    (
        StatusCode::BAD_REQUEST,
        axum::Json(wire::ErrorBody::new(code, message)),
    )
}

fn bearer_of(headers: &axum::http::HeaderMap) -> Option<String> {
    headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|v| v.to_string())
}

/// Cuts a response down to the token cap, counting whitespace-separated
/// words as tokens.
fn apply_token_cap(text: &str, max_new_tokens: u32) -> (String, bool) {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() > max_new_tokens as usize {
        (words[..max_new_tokens as usize].join(" "), true)
    } else {
        (text.to_string(), false)
    }
}

async fn handle_caption(
    State(state): State<Arc<MockState>>,
    headers: axum::http::HeaderMap,
    body: axum::body::Bytes,
) -> axum::response::Response {
    let _guard = InFlightGuard::enter(&state);
    state.caption_requests.fetch_add(1, Ordering::SeqCst);
    let req: wire::CaptionRequestBody = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return protocol_error("bad_request", format!("malformed caption request: {e}"))
                .into_response()
        }
    };
    state.record(
        "caption",
        bearer_of(&headers),
        serde_json::to_value(&req).expect("request serializes"),
    );
    let image = match base64::engine::general_purpose::STANDARD.decode(&req.image_b64) {
        Ok(bytes) => bytes,
        Err(e) => {
            return protocol_error("bad_request", format!("image_b64 not base64: {e}"))
                .into_response()
        }
    };
    if state.fixed_delay > Duration::ZERO {
        tokio::time::sleep(state.fixed_delay).await;
    }
    let text = match state.rigged(RigTarget::Caption, &req.instruction) {
        Some(rigged) => rigged.to_string(),
        None => format!(
            "mock caption {} for instruction {}",
            short_digest(&image),
            short_digest(req.instruction.as_bytes())
        ),
    };
    let (text, truncated) = apply_token_cap(&text, req.max_new_tokens);
    axum::Json(wire::GenerationBody { text, truncated }).into_response()
}

async fn handle_generate(
    State(state): State<Arc<MockState>>,
    headers: axum::http::HeaderMap,
    body: axum::body::Bytes,
) -> axum::response::Response {
    let _guard = InFlightGuard::enter(&state);
    state.generate_requests.fetch_add(1, Ordering::SeqCst);
    let req: wire::GenerateRequestBody = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return protocol_error("bad_request", format!("malformed generate request: {e}"))
                .into_response()
        }
    };
    state.record(
        "generate",
        bearer_of(&headers),
        serde_json::to_value(&req).expect("request serializes"),
    );
    if state.fixed_delay > Duration::ZERO {
        tokio::time::sleep(state.fixed_delay).await;
    }
    let text = match state.rigged(RigTarget::Generate, &req.prompt) {
        Some(rigged) => rigged.to_string(),
        None => first_option_letter(&req.prompt)
            .map(|c| c.to_string())
            .unwrap_or_else(|| "no options present in prompt".to_string()),
    };
    let (text, truncated) = apply_token_cap(&text, req.max_new_tokens);
    axum::Json(wire::GenerationBody { text, truncated }).into_response()
}

/// First letter of the prompt's rendered options block.
fn first_option_letter(prompt: &str) -> Option<char> {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let re = RE.get_or_init(|| regex::Regex::new(r"Option ([A-Z]):").expect("static regex"));
    re.captures(prompt)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().chars().next())
}

async fn handle_stats(State(state): State<Arc<MockState>>) -> axum::Json<wire::StatsBody> {
    axum::Json(state.snapshot())
}

async fn handle_log(State(state): State<Arc<MockState>>) -> impl IntoResponse {
    let entries = state.log.lock().expect("log lock");
    let mut out = String::new();
    for e in entries.iter() {
        out.push_str(&serde_json::to_string(e).expect("log entry serializes"));
        out.push('\n');
    }
    out
}
