//! Wire protocol v1: JSON over HTTP, shared by the client and the mock
//! server.
//!
//! ```text
//! POST {base}/v1/caption  {"model","image_b64","instruction","max_new_tokens","top_p","seed"}
//! POST {base}/v1/generate {"model","prompt","max_new_tokens","top_p","seed"}
//!   -> 200 {"text","truncated"}
//!   -> 4xx/5xx {"error":{"code","message"}}
//! ```
//!
//! `top_p`/`seed` serialize as explicit nulls when absent.

use serde::{Deserialize, Serialize};

pub const CAPTION_PATH: &str = "/v1/caption";
pub const GENERATE_PATH: &str = "/v1/generate";
pub const STATS_PATH: &str = "/v1/stats";
pub const LOG_PATH: &str = "/v1/log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequestBody {
    pub model: String,
    pub image_b64: String,
    pub instruction: String,
    pub max_new_tokens: u32,
    pub top_p: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequestBody {
    pub model: String,
    pub prompt: String,
    pub max_new_tokens: u32,
    pub top_p: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationBody {
    pub text: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            error: ErrorDetail {
                code: code.into(),
                message: message.into(),
            },
        }
    }
}

/// Counters exposed by the mock server at `/v1/stats`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsBody {
    pub in_flight: usize,
    pub high_water_in_flight: usize,
    pub caption_requests: u64,
    pub generate_requests: u64,
}
