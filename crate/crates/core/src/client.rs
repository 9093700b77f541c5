//! Network clients for the two model roles: the captioner (image +
//! instruction -> caption text) and the reasoner (text -> text).
//!
//! Both roles are opaque services behind the same small wire protocol.
//! Transient failures (connection errors, timeouts, 5xx, 429) are retried
//! with jittered exponential backoff; other 4xx responses fail immediately.
//! A per-endpoint semaphore bounds in-flight requests, so batch helpers and
//! concurrent callers together never exceed `max_in_flight`.

use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use futures::stream::StreamExt;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::error::{Error, Result};
use crate::types::DecodeParams;
use crate::wire;

/// How request/response bodies are shaped on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireFormat {
    /// The protocol in [`crate::wire`].
    #[default]
    Native,
    /// The de-facto chat-completions shape spoken by common open-model
    /// servers, so real backends plug in without code changes.
    ChatCompletions,
}

/// One inference endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    /// Echoed into cache keys, predictions and reports.
    pub model_id: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub auth_token: Option<String>,
    #[serde(default)]
    pub wire_format: WireFormat,
    /// Backoff starts here and doubles per attempt, jittered, capped below.
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_backoff_cap_ms")]
    pub backoff_cap_ms: u64,
}

fn default_timeout_s() -> u64 {
    120
}
fn default_max_retries() -> u32 {
    3
}
fn default_max_in_flight() -> usize {
    8
}
fn default_backoff_base_ms() -> u64 {
    1_000
}
fn default_backoff_cap_ms() -> u64 {
    30_000
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_id: model_id.into(),
            timeout_s: default_timeout_s(),
            max_retries: default_max_retries(),
            max_in_flight: default_max_in_flight(),
            auth_token: None,
            wire_format: WireFormat::default(),
            backoff_base_ms: default_backoff_base_ms(),
            backoff_cap_ms: default_backoff_cap_ms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_url.trim().is_empty() {
            return Err(Error::Config("endpoint base_url is empty".into()));
        }
        if self.max_in_flight < 1 {
            return Err(Error::Config("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

/// One captioning call: a frame plus the rendered instruction.
#[derive(Debug, Clone)]
pub struct CaptionRequest {
    pub image_bytes: Vec<u8>,
    pub instruction: String,
    pub decode: DecodeParams,
}

/// One reasoning call: the rendered QA prompt.
#[derive(Debug, Clone)]
pub struct GenerateRequest {
    pub prompt: String,
    pub decode: DecodeParams,
}

/// Service output: verbatim text plus whether the token cap was hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationOutput {
    pub text: String,
    pub truncated: bool,
}

/// Client for one endpoint; cheap to clone and shareable across threads.
#[derive(Debug, Clone)]
pub struct ModelClient {
    cfg: EndpointConfig,
    http: reqwest::Client,
    gate: Arc<Semaphore>,
}

impl ModelClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self> {
        cfg.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_s))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let gate = Arc::new(Semaphore::new(cfg.max_in_flight));
        Ok(Self { cfg, http, gate })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub fn model_id(&self) -> &str {
        &self.cfg.model_id
    }

    /// Captions one frame. Transient failures retried per policy.
    pub async fn caption(&self, req: &CaptionRequest) -> Result<GenerationOutput> {
        if req.instruction.trim().is_empty() {
            return Err(Error::Validation("caption instruction is empty".into()));
        }
        if req.image_bytes.is_empty() {
            return Err(Error::Validation("caption image is empty".into()));
        }
        req.decode.validate()?;
        let (path, body) = match self.cfg.wire_format {
            WireFormat::Native => {
                let body = wire::CaptionRequestBody {
                    model: self.cfg.model_id.clone(),
                    image_b64: base64::engine::general_purpose::STANDARD.encode(&req.image_bytes),
                    instruction: req.instruction.clone(),
                    max_new_tokens: req.decode.max_new_tokens,
                    top_p: req.decode.top_p,
                    seed: req.decode.seed,
                };
                (
                    wire::CAPTION_PATH,
                    serde_json::to_value(body).expect("serializable"),
                )
            }
            WireFormat::ChatCompletions => (
                CHAT_COMPLETIONS_PATH,
                chat_caption_body(&self.cfg.model_id, req),
            ),
        };
        self.post_with_retry(path, &body).await
    }

    /// Generates text from a prompt. Same retry policy as [`Self::caption`].
    pub async fn generate(&self, req: &GenerateRequest) -> Result<GenerationOutput> {
        if req.prompt.trim().is_empty() {
            return Err(Error::Validation("generate prompt is empty".into()));
        }
        req.decode.validate()?;
        let (path, body) = match self.cfg.wire_format {
            WireFormat::Native => {
                let body = wire::GenerateRequestBody {
                    model: self.cfg.model_id.clone(),
                    prompt: req.prompt.clone(),
                    max_new_tokens: req.decode.max_new_tokens,
                    top_p: req.decode.top_p,
                    seed: req.decode.seed,
                };
                (
                    wire::GENERATE_PATH,
                    serde_json::to_value(body).expect("serializable"),
                )
            }
            WireFormat::ChatCompletions => (
                CHAT_COMPLETIONS_PATH,
                chat_generate_body(&self.cfg.model_id, req),
            ),
        };
        self.post_with_retry(path, &body).await
    }

    /// Captions a batch, returning results in request order regardless of
    /// completion order. At most `max_in_flight` requests are outstanding;
    /// individual failures are reported per slot without aborting siblings.
    pub async fn caption_batch(&self, reqs: &[CaptionRequest]) -> Vec<Result<GenerationOutput>> {
        futures::stream::iter(reqs.iter().map(|r| self.caption(r)))
            .buffered(self.cfg.max_in_flight.max(1))
            .collect()
            .await
    }

    async fn post_with_retry(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<GenerationOutput> {
        let url = format!("{}{}", self.cfg.base_url.trim_end_matches('/'), path);
        let mut attempt: u32 = 0;
        loop {
            let _permit = self
                .gate
                .acquire()
                .await
                .expect("request gate never closes");
            let mut builder = self.http.post(&url).json(body);
            if let Some(token) = &self.cfg.auth_token {
                builder = builder.bearer_auth(token);
            }
            // every non-returning path below is a retryable failure
            let reason: String = match builder.send().await {
                Err(e) if e.is_timeout() || e.is_connect() => format!("transport: {e}"),
                Err(e) => return Err(Error::Unavailable(format!("{url}: {e}"))),
                Ok(resp) => {
                    let status = resp.status();
                    let bytes = resp
                        .bytes()
                        .await
                        .map_err(|e| Error::Protocol(format!("{url}: reading body: {e}")))?;
                    if status.is_success() {
                        return parse_success(&bytes, self.cfg.wire_format, &url);
                    }
                    let detail = error_detail(&bytes);
                    if status.as_u16() == 429 || status.is_server_error() {
                        format!("status {status}: {detail}")
                    } else if status.is_client_error() {
                        return Err(Error::BadRequest(format!("{url}: {status}: {detail}")));
                    } else {
                        return Err(Error::Protocol(format!(
                            "{url}: unexpected status {status}: {detail}"
                        )));
                    }
                }
            };
            drop(_permit);
            if attempt >= self.cfg.max_retries {
                return Err(Error::Unavailable(format!(
                    "{url}: retries exhausted after {} attempts: {reason}",
                    attempt + 1
                )));
            }
            tokio::time::sleep(self.backoff_delay(attempt)).await;
            attempt += 1;
        }
    }

    /// Exponential backoff with jitter: delay in `[base/2, base] * 2^attempt`,
    /// capped.
    fn backoff_delay(&self, attempt: u32) -> Duration {
        let exp = self
            .cfg
            .backoff_base_ms
            .saturating_mul(1u64 << attempt.min(16))
            .min(self.cfg.backoff_cap_ms);
        let jittered = rand::thread_rng().gen_range(exp / 2..=exp.max(1));
        Duration::from_millis(jittered)
    }
}

fn parse_success(bytes: &[u8], format: WireFormat, url: &str) -> Result<GenerationOutput> {
    match format {
        WireFormat::Native => {
            let body: wire::GenerationBody = serde_json::from_slice(bytes)
                .map_err(|e| Error::Protocol(format!("{url}: malformed response: {e}")))?;
            Ok(GenerationOutput {
                text: body.text,
                truncated: body.truncated,
            })
        }
        WireFormat::ChatCompletions => parse_chat_response(bytes)
            .map_err(|e| Error::Protocol(format!("{url}: malformed response: {e}"))),
    }
}

fn error_detail(bytes: &[u8]) -> String {
    match serde_json::from_slice::<wire::ErrorBody>(bytes) {
        Ok(body) => format!("{}: {}", body.error.code, body.error.message),
        Err(_) => String::from_utf8_lossy(bytes).chars().take(200).collect(),
    }
}

const CHAT_COMPLETIONS_PATH: &str = "/v1/chat/completions";

/// Chat-completions request for a caption call: text part plus a base64
/// data-URL image part.
fn chat_caption_body(model: &str, req: &CaptionRequest) -> serde_json::Value {
    let mime = if req.image_bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        "image/png"
    } else {
        "image/jpeg"
    };
    let data_url = format!(
        "data:{mime};base64,{}",
        base64::engine::general_purpose::STANDARD.encode(&req.image_bytes)
    );
    serde_json::json!({
        "model": model,
        "messages": [{
            "role": "user",
            "content": [
                {"type": "text", "text": req.instruction},
                {"type": "image_url", "image_url": {"url": data_url}},
            ],
        }],
        "max_tokens": req.decode.max_new_tokens,
        "top_p": req.decode.top_p,
        "seed": req.decode.seed,
    })
}

fn chat_generate_body(model: &str, req: &GenerateRequest) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [{"role": "user", "content": req.prompt}],
        "max_tokens": req.decode.max_new_tokens,
        "top_p": req.decode.top_p,
        "seed": req.decode.seed,
    })
}

fn parse_chat_response(bytes: &[u8]) -> std::result::Result<GenerationOutput, String> {
    #[derive(Deserialize)]
    struct Choice {
        message: ChoiceMessage,
        finish_reason: Option<String>,
    }
    #[derive(Deserialize)]
    struct ChoiceMessage {
        content: String,
    }
    #[derive(Deserialize)]
    struct ChatResponse {
        choices: Vec<Choice>,
    }
    let parsed: ChatResponse = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let choice = parsed.choices.into_iter().next().ok_or("empty choices")?;
    Ok(GenerationOutput {
        text: choice.message.content,
        truncated: choice.finish_reason.as_deref() == Some("length"),
    })
}
