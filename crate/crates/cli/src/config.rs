//! Declarative run configuration.
//!
//! Precedence, lowest to highest: built-in defaults, config file, environment
//! (`QVID_AUTH_TOKEN`), command-line flags. The resolved configuration is
//! embedded in every run manifest for provenance.

use std::path::{Path, PathBuf};

use qvid_core::client::{EndpointConfig, WireFormat};
use qvid_core::error::{Error, Result};
use qvid_core::pipeline::{FailPolicy, PipelineConfig};
use qvid_core::sampler::ImageFormat;
use serde::Deserialize;

/// On-disk TOML schema; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub captioner: EndpointSection,
    #[serde(default)]
    pub reasoner: EndpointSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub decoder: DecoderSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub base_url: Option<String>,
    pub model_id: Option<String>,
    pub timeout_s: Option<u64>,
    pub max_retries: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub auth_token: Option<String>,
    pub wire_format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_frames: Option<usize>,
    pub caption_template: Option<String>,
    pub qa_template: Option<String>,
    pub caption_max_tokens: Option<u32>,
    pub caption_top_p: Option<f64>,
    pub caption_seed: Option<u64>,
    pub reason_max_tokens: Option<u32>,
    pub cache_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub fail_policy: Option<String>,
    pub numbered_captions: Option<bool>,
    pub image_max_side: Option<u32>,
    pub image_format: Option<String>,
    pub clip_fps: Option<f64>,
    /// Extra template catalog merged over the built-ins.
    pub templates_file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub probe_command: Option<String>,
    pub extract_command: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Endpoint-related flag overrides shared by `run` and `ablate`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct EndpointFlags {
    /// Captioner service base URL
    #[arg(long)]
    pub captioner_url: Option<String>,
    /// Captioner model id (echoed in cache keys and reports)
    #[arg(long)]
    pub captioner_model: Option<String>,
    /// Reasoner service base URL
    #[arg(long)]
    pub reasoner_url: Option<String>,
    /// Reasoner model id
    #[arg(long)]
    pub reasoner_model: Option<String>,
    /// Bearer token for both endpoints
    #[arg(long, env = "QVID_AUTH_TOKEN", hide_env_values = true)]
    pub auth_token: Option<String>,
    /// Wire format: native | chat_completions
    #[arg(long)]
    pub wire_format: Option<String>,
    /// Request timeout in seconds
    #[arg(long)]
    pub timeout_s: Option<u64>,
    /// Retries per request on transient failures
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// In-flight request bound per endpoint
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

/// Pipeline-shaping flag overrides shared by `run` and `ablate`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct PipelineFlags {
    /// Frames sampled per video
    #[arg(long)]
    pub n_frames: Option<usize>,
    /// Captioning template id
    #[arg(long)]
    pub caption_template: Option<String>,
    /// QA template id
    #[arg(long)]
    pub qa_template: Option<String>,
    /// Caption token cap
    #[arg(long)]
    pub caption_max_tokens: Option<u32>,
    /// Caption nucleus-sampling mass in (0, 1]; 0 disables sampling (greedy)
    #[arg(long)]
    pub caption_top_p: Option<f64>,
    /// Caption sampling seed (for reproducible sampling backends)
    #[arg(long)]
    pub caption_seed: Option<u64>,
    /// Reasoner token cap
    #[arg(long)]
    pub reason_max_tokens: Option<u32>,
    /// Caption cache root; omit to disable caching
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Record-level parallelism
    #[arg(long)]
    pub workers: Option<usize>,
    /// abort | skip_record
    #[arg(long)]
    pub fail_policy: Option<String>,
    /// Prefix each caption with its frame number in the QA prompt
    #[arg(long)]
    pub numbered_captions: bool,
    /// Longest image side sent to the captioner
    #[arg(long)]
    pub image_max_side: Option<u32>,
    /// Transport image format: png | jpeg
    #[arg(long)]
    pub image_format: Option<String>,
    /// Frame rate used to honor clip spans (e.g. 3.0 for 3 fps frame dirs)
    #[arg(long)]
    pub clip_fps: Option<f64>,
    /// Extra template catalog file merged over the built-ins
    #[arg(long)]
    pub templates_file: Option<PathBuf>,
}

fn parse_wire_format(s: &str) -> Result<WireFormat> {
    match s {
        "native" => Ok(WireFormat::Native),
        "chat_completions" | "chat-completions" => Ok(WireFormat::ChatCompletions),
        other => Err(Error::Config(format!(
            "wire format '{other}' (expected native|chat_completions)"
        ))),
    }
}

fn parse_image_format(s: &str) -> Result<ImageFormat> {
    match s {
        "png" => Ok(ImageFormat::Png),
        "jpeg" | "jpg" => Ok(ImageFormat::Jpeg),
        other => Err(Error::Config(format!(
            "image format '{other}' (expected png|jpeg)"
        ))),
    }
}

fn apply_endpoint_section(target: &mut EndpointConfig, section: &EndpointSection) -> Result<()> {
    if let Some(v) = &section.base_url {
        target.base_url = v.clone();
    }
    if let Some(v) = &section.model_id {
        target.model_id = v.clone();
    }
    if let Some(v) = section.timeout_s {
        target.timeout_s = v;
    }
    if let Some(v) = section.max_retries {
        target.max_retries = v;
    }
    if let Some(v) = section.max_in_flight {
        target.max_in_flight = v;
    }
    if let Some(v) = &section.auth_token {
        target.auth_token = Some(v.clone());
    }
    if let Some(v) = &section.wire_format {
        target.wire_format = parse_wire_format(v)?;
    }
    Ok(())
}

/// Builds the resolved pipeline configuration from defaults, file, env and
/// flags, in that order. Endpoint URLs must be present somewhere.
pub fn resolve_pipeline_config(
    file: &FileConfig,
    endpoints: &EndpointFlags,
    flags: &PipelineFlags,
) -> Result<(PipelineConfig, Option<PathBuf>)> {
    let mut captioner = EndpointConfig::new("", "captioner");
    let mut reasoner = EndpointConfig::new("", "reasoner");
    apply_endpoint_section(&mut captioner, &file.captioner)?;
    apply_endpoint_section(&mut reasoner, &file.reasoner)?;

    // flags (and QVID_AUTH_TOKEN via clap's env fallback) override the file
    if let Some(v) = &endpoints.captioner_url {
        captioner.base_url = v.clone();
    }
    if let Some(v) = &endpoints.captioner_model {
        captioner.model_id = v.clone();
    }
    if let Some(v) = &endpoints.reasoner_url {
        reasoner.base_url = v.clone();
    }
    if let Some(v) = &endpoints.reasoner_model {
        reasoner.model_id = v.clone();
    }
    if let Some(v) = &endpoints.auth_token {
        captioner.auth_token = Some(v.clone());
        reasoner.auth_token = Some(v.clone());
    }
    if let Some(v) = &endpoints.wire_format {
        let parsed = parse_wire_format(v)?;
        captioner.wire_format = parsed;
        reasoner.wire_format = parsed;
    }
    if let Some(v) = endpoints.timeout_s {
        captioner.timeout_s = v;
        reasoner.timeout_s = v;
    }
    if let Some(v) = endpoints.max_retries {
        captioner.max_retries = v;
        reasoner.max_retries = v;
    }
    if let Some(v) = endpoints.max_in_flight {
        captioner.max_in_flight = v;
        reasoner.max_in_flight = v;
    }
    if captioner.base_url.is_empty() {
        return Err(Error::Config(
            "captioner URL missing (set --captioner-url or [captioner].base_url)".into(),
        ));
    }
    if reasoner.base_url.is_empty() {
        return Err(Error::Config(
            "reasoner URL missing (set --reasoner-url or [reasoner].base_url)".into(),
        ));
    }

    let mut cfg = PipelineConfig::new(captioner, reasoner);
    let run = &file.run;
    if let Some(v) = run.n_frames {
        cfg.sampler.n_frames = v;
    }
    if let Some(v) = &run.caption_template {
        cfg.caption_template_id = v.clone();
    }
    if let Some(v) = &run.qa_template {
        cfg.qa_template_id = v.clone();
    }
    if let Some(v) = run.caption_max_tokens {
        cfg.caption_decode.max_new_tokens = v;
    }
    if let Some(p) = run.caption_top_p {
        cfg.caption_decode.top_p = (p != 0.0).then_some(p);
    }
    if run.caption_seed.is_some() {
        cfg.caption_decode.seed = run.caption_seed;
    }
    if let Some(v) = run.reason_max_tokens {
        cfg.reason_decode.max_new_tokens = v;
    }
    if run.cache_dir.is_some() {
        cfg.cache_dir = run.cache_dir.clone();
    }
    if let Some(v) = run.workers {
        cfg.workers = v;
    }
    if let Some(v) = &run.fail_policy {
        cfg.fail_policy = v.parse::<FailPolicy>()?;
    }
    if let Some(v) = run.numbered_captions {
        cfg.joiner.numbered = v;
    }
    if let Some(v) = run.image_max_side {
        cfg.sampler.image_max_side = v;
    }
    if let Some(v) = &run.image_format {
        cfg.sampler.image_format = parse_image_format(v)?;
    }
    if run.clip_fps.is_some() {
        cfg.sampler.clip_fps = run.clip_fps;
    }
    if let Some(v) = &file.decoder.probe_command {
        cfg.sampler.decoder.probe_command = v.clone();
    }
    if let Some(v) = &file.decoder.extract_command {
        cfg.sampler.decoder.extract_command = v.clone();
    }

    if let Some(v) = flags.n_frames {
        cfg.sampler.n_frames = v;
    }
    if let Some(v) = &flags.caption_template {
        cfg.caption_template_id = v.clone();
    }
    if let Some(v) = &flags.qa_template {
        cfg.qa_template_id = v.clone();
    }
    if let Some(v) = flags.caption_max_tokens {
        cfg.caption_decode.max_new_tokens = v;
    }
    if let Some(p) = flags.caption_top_p {
        cfg.caption_decode.top_p = (p != 0.0).then_some(p);
    }
    if flags.caption_seed.is_some() {
        cfg.caption_decode.seed = flags.caption_seed;
    }
    if let Some(v) = flags.reason_max_tokens {
        cfg.reason_decode.max_new_tokens = v;
    }
    if flags.cache_dir.is_some() {
        cfg.cache_dir = flags.cache_dir.clone();
    }
    if let Some(v) = flags.workers {
        cfg.workers = v;
    }
    if let Some(v) = &flags.fail_policy {
        cfg.fail_policy = v.parse::<FailPolicy>()?;
    }
    if flags.numbered_captions {
        cfg.joiner.numbered = true;
    }
    if let Some(v) = flags.image_max_side {
        cfg.sampler.image_max_side = v;
    }
    if let Some(v) = &flags.image_format {
        cfg.sampler.image_format = parse_image_format(v)?;
    }
    if flags.clip_fps.is_some() {
        cfg.sampler.clip_fps = flags.clip_fps;
    }

    let templates_file = flags
        .templates_file
        .clone()
        .or_else(|| run.templates_file.clone());
    Ok((cfg, templates_file))
}
