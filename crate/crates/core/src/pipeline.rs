//! End-to-end orchestration: sample frames, render the captioning
//! instruction, caption every frame (through the cache), assemble the video
//! description, render the QA prompt, query the reasoner, parse the answer.
//!
//! With deterministic endpoints (seeded or greedy) the whole pipeline is a
//! pure function of (record, config): repeated runs produce byte-identical
//! prediction files. Dataset runs persist each prediction as it completes,
//! so interrupted runs resume from the completed-record log plus the cache.

use std::collections::{HashMap, HashSet};
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use futures::StreamExt;
use serde::{Deserialize, Serialize};

use crate::cache::{hex_digest, make_key, CacheEntry, CaptionCache, CaptionKeyFields};
use crate::client::{CaptionRequest, EndpointConfig, GenerateRequest, ModelClient};
use crate::datasets::NormalizedDataset;
use crate::error::{Error, Result};
use crate::sampler::{self, SamplerConfig};
use crate::templates::{CaptionJoiner, TemplateKind, TemplateRegistry};
use crate::types::{letter_for_index, Caption, CaptionSet, DecodeParams, Prediction, QARecord};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const PARTIAL_FILE: &str = "predictions.partial.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// What to do when a record fails hard (source error, retries exhausted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailPolicy {
    /// Surface the first hard failure and stop.
    Abort,
    /// Emit an unparsed prediction flagged `failed` and keep going.
    #[default]
    SkipRecord,
}

impl std::str::FromStr for FailPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abort" => Ok(FailPolicy::Abort),
            "skip_record" | "skip-record" => Ok(FailPolicy::SkipRecord),
            other => Err(Error::Config(format!(
                "fail policy '{other}' (expected abort|skip_record)"
            ))),
        }
    }
}

/// Resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sampler: SamplerConfig,
    pub caption_template_id: String,
    pub qa_template_id: String,
    pub joiner: CaptionJoiner,
    pub captioner: EndpointConfig,
    pub reasoner: EndpointConfig,
    pub caption_decode: DecodeParams,
    pub reason_decode: DecodeParams,
    /// Caption cache root; `None` disables caching.
    pub cache_dir: Option<std::path::PathBuf>,
    pub fail_policy: FailPolicy,
    /// Records processed in parallel during dataset runs.
    pub workers: usize,
}

impl PipelineConfig {
    /// Defaults around two endpoints: 64 frames, 30-token nucleus-sampled
    /// captions, greedy reasoner.
    pub fn new(captioner: EndpointConfig, reasoner: EndpointConfig) -> Self {
        Self {
            sampler: SamplerConfig::default(),
            caption_template_id: "dependent_base".into(),
            qa_template_id: "qa_base".into(),
            joiner: CaptionJoiner::default(),
            captioner,
            reasoner,
            caption_decode: DecodeParams::caption_default(),
            reason_decode: DecodeParams::reason_default(),
            cache_dir: None,
            fail_policy: FailPolicy::default(),
            workers: 4,
        }
    }
}

/// Progress callback for dataset runs.
pub trait ProgressSink: Send + Sync {
    fn on_record(&self, done: usize, total: usize, record_id: &str, failed: bool);
}

/// Silent sink.
pub struct NoProgress;

impl ProgressSink for NoProgress {
    fn on_record(&self, _: usize, _: usize, _: &str, _: bool) {}
}

/// Provenance document written next to every prediction file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub dataset_name: String,
    pub n_records: usize,
    pub n_completed: usize,
    pub n_failed: usize,
    pub n_unparsed: usize,
    pub interrupted: bool,
    pub started_at: chrono::DateTime<chrono::Utc>,
    pub finished_at: chrono::DateTime<chrono::Utc>,
    pub caption_template_id: String,
    pub caption_template_body: String,
    pub qa_template_id: String,
    pub qa_template_body: String,
    pub captioner_model_id: String,
    pub reasoner_model_id: String,
    /// Resolved configuration (auth tokens redacted).
    pub config: PipelineConfig,
}

/// A dataset run's in-memory result.
#[derive(Debug)]
pub struct RunOutcome {
    /// One prediction per record, in dataset order.
    pub predictions: Vec<Prediction>,
    pub manifest: RunManifest,
}

/// The orchestrator. Cheap to clone; shareable across tasks.
#[derive(Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    registry: Arc<TemplateRegistry>,
    captioner: ModelClient,
    reasoner: ModelClient,
    cache: Option<CaptionCache>,
}

impl Pipeline {
    /// Validates the configuration (template ids resolve with the right
    /// kinds, decode params sane) before anything touches the network.
    pub fn new(cfg: PipelineConfig, registry: Arc<TemplateRegistry>) -> Result<Self> {
        let caption_t = registry.get(&cfg.caption_template_id)?;
        if caption_t.kind != TemplateKind::Captioning {
            return Err(Error::Config(format!(
                "'{}' is not a captioning template",
                cfg.caption_template_id
            )));
        }
        let qa_t = registry.get(&cfg.qa_template_id)?;
        if qa_t.kind != TemplateKind::QaTask {
            return Err(Error::Config(format!(
                "'{}' is not a qa_task template",
                cfg.qa_template_id
            )));
        }
        cfg.caption_decode.validate()?;
        cfg.reason_decode.validate()?;
        if cfg.workers < 1 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        let captioner = ModelClient::new(cfg.captioner.clone())?;
        let reasoner = ModelClient::new(cfg.reasoner.clone())?;
        let cache = cfg.cache_dir.as_ref().map(CaptionCache::new);
        Ok(Self {
            cfg,
            registry,
            captioner,
            reasoner,
            cache,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Captions the planned frames of one record's video, in frame order,
    /// hitting the cache before the captioner.
    pub async fn describe_video(&self, record: &QARecord) -> Result<CaptionSet> {
        let video = record.video.clone();
        let sampler_cfg = self.cfg.sampler.clone();
        let frames = tokio::task::spawn_blocking(move || {
            let total = sampler::probe(&video, &sampler_cfg.decoder)?;
            let indices = sampler::plan_for_video(&video, total, &sampler_cfg)?;
            sampler::extract(&video, &indices, &sampler_cfg)
        })
        .await
        .map_err(|e| Error::Source(format!("sampling task panicked: {e}")))??;

        let instruction = self
            .registry
            .render_caption_instruction(&self.cfg.caption_template_id, &record.question)?;

        let mut texts: Vec<Option<(String, bool)>> = vec![None; frames.len()];
        let mut misses = Vec::new();
        for frame in frames {
            let image_digest = hex_digest(&frame.image_bytes);
            let key = make_key(&CaptionKeyFields {
                captioner_model_id: self.captioner.model_id(),
                video_id: &record.video.video_id,
                frame_source_index: frame.source_index,
                instruction: &instruction.text,
                decode: self.cfg.caption_decode,
                image_digest: &image_digest,
            });
            if let Some(cache) = &self.cache {
                if let Some(entry) = cache.get(&key)? {
                    texts[frame.index] = Some((entry.caption_text, entry.truncated));
                    continue;
                }
            }
            let position = frame.index;
            misses.push((
                position,
                key,
                CaptionRequest {
                    image_bytes: frame.image_bytes,
                    instruction: instruction.text.clone(),
                    decode: self.cfg.caption_decode,
                },
            ));
        }
        if !misses.is_empty() {
            let requests: Vec<CaptionRequest> = misses.iter().map(|(_, _, r)| r.clone()).collect();
            let results = self.captioner.caption_batch(&requests).await;
            for ((position, key, _), result) in misses.into_iter().zip(results) {
                let output = result?;
                if let Some(cache) = &self.cache {
                    let entry = CacheEntry {
                        key: key.clone(),
                        caption_text: output.text.clone(),
                        truncated: output.truncated,
                        created_at: chrono::Utc::now(),
                        pipeline_version: env!("CARGO_PKG_VERSION").to_string(),
                    };
                    cache.put(&key, &entry)?;
                }
                texts[position] = Some((output.text, output.truncated));
            }
        }
        let captions = texts
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                let (text, truncated) = slot.expect("every sampled frame resolves to a caption");
                Caption::new(i, &text, truncated)
            })
            .collect();
        CaptionSet::new(captions, &record.video.video_id, &record.question)
    }

    /// Renders the QA prompt from the captions, queries the reasoner and
    /// parses its answer.
    pub async fn answer(&self, record: &QARecord, captions: &CaptionSet) -> Result<Prediction> {
        let rendered = self.registry.render_qa_prompt(
            &self.cfg.qa_template_id,
            captions,
            record,
            &self.cfg.joiner,
        )?;
        let output = self
            .reasoner
            .generate(&GenerateRequest {
                prompt: rendered.text,
                decode: self.cfg.reason_decode,
            })
            .await?;
        let parsed = parse_answer(&output.text, record.options.len(), &record.options);
        let letter = parsed.map(|i| {
            letter_for_index(i)
                .expect("parsed index below option count")
                .to_string()
        });
        Ok(Prediction {
            record_id: record.record_id.clone(),
            answer_index: parsed,
            raw_text: output.text,
            letter,
            caption_template_id: self.cfg.caption_template_id.clone(),
            qa_template_id: self.cfg.qa_template_id.clone(),
            captioner_model_id: self.cfg.captioner.model_id.clone(),
            reasoner_model_id: self.cfg.reasoner.model_id.clone(),
            n_frames: captions.len(),
            failed: false,
        })
    }

    /// Full flow for one record.
    pub async fn process_record(&self, record: &QARecord) -> Result<Prediction> {
        record.validate()?;
        let captions = self.describe_video(record).await?;
        self.answer(record, &captions).await
    }

    fn failed_prediction(&self, record: &QARecord, err: &Error) -> Prediction {
        Prediction {
            record_id: record.record_id.clone(),
            answer_index: None,
            raw_text: format!("error [{}]: {err}", err.class()),
            letter: None,
            caption_template_id: self.cfg.caption_template_id.clone(),
            qa_template_id: self.cfg.qa_template_id.clone(),
            captioner_model_id: self.cfg.captioner.model_id.clone(),
            reasoner_model_id: self.cfg.reasoner.model_id.clone(),
            n_frames: 0,
            failed: true,
        }
    }

    /// Runs the whole dataset with `workers`-way record parallelism.
    ///
    /// Every completed prediction is appended to the partial log immediately;
    /// the final prediction file is written in dataset order at the end. With
    /// `resume`, records already present in the partial log are not re-run.
    /// Setting `cancel` stops dispatching new records, drains in-flight ones,
    /// writes the manifest marked interrupted and returns an error.
    pub async fn run_dataset(
        &self,
        dataset: &NormalizedDataset,
        out_dir: &Path,
        resume: bool,
        progress: &dyn ProgressSink,
        cancel: &AtomicBool,
    ) -> Result<RunOutcome> {
        if dataset.is_empty() {
            return Err(Error::Validation("dataset has no records".into()));
        }
        let started_at = chrono::Utc::now();
        std::fs::create_dir_all(out_dir)?;
        let partial_path = out_dir.join(PARTIAL_FILE);

        let mut completed: HashMap<String, Prediction> = HashMap::new();
        if resume && partial_path.exists() {
            let known: HashSet<&str> = dataset
                .records
                .iter()
                .map(|r| r.record_id.as_str())
                .collect();
            let text = std::fs::read_to_string(&partial_path)?;
            for line in text.lines() {
                // torn or foreign lines are recomputed, not trusted
                if let Ok(pred) = serde_json::from_str::<Prediction>(line) {
                    if known.contains(pred.record_id.as_str()) {
                        completed.insert(pred.record_id.clone(), pred);
                    }
                }
            }
        } else if partial_path.exists() {
            std::fs::remove_file(&partial_path)?;
        }

        let partial_file = Mutex::new(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&partial_path)?,
        );
        let total = dataset.len();
        let done = AtomicUsize::new(completed.len());
        let pending: Vec<&QARecord> = dataset
            .records
            .iter()
            .filter(|r| !completed.contains_key(&r.record_id))
            .collect();

        {
            let mut stream = futures::stream::iter(
                pending
                    .into_iter()
                    .take_while(|_| !cancel.load(Ordering::SeqCst))
                    .map(|record| async move { (record, self.process_record(record).await) }),
            )
            .buffer_unordered(self.cfg.workers.max(1));

            while let Some((record, outcome)) = stream.next().await {
                let prediction = match outcome {
                    Ok(p) => p,
                    Err(e) => match self.cfg.fail_policy {
                        FailPolicy::Abort => return Err(e),
                        FailPolicy::SkipRecord => self.failed_prediction(record, &e),
                    },
                };
                let mut line = serde_json::to_vec(&prediction)
                    .map_err(|e| Error::Storage(format!("serialize prediction: {e}")))?;
                line.push(b'\n');
                {
                    let mut file = partial_file.lock().expect("partial log lock");
                    file.write_all(&line)?;
                }
                let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                progress.on_record(n, total, &prediction.record_id, prediction.failed);
                completed.insert(prediction.record_id.clone(), prediction);
            }
        }

        let interrupted = completed.len() < total;
        let manifest = self.build_manifest(dataset, &completed, interrupted, started_at)?;
        std::fs::write(
            out_dir.join(MANIFEST_FILE),
            serde_json::to_vec_pretty(&manifest)
                .map_err(|e| Error::Storage(format!("serialize manifest: {e}")))?,
        )?;
        if interrupted {
            return Err(Error::Interrupted(format!(
                "{} of {} records completed; re-run with resume to finish",
                completed.len(),
                total
            )));
        }

        let predictions: Vec<Prediction> = dataset
            .records
            .iter()
            .map(|r| completed[&r.record_id].clone())
            .collect();
        let mut out = Vec::new();
        for p in &predictions {
            out.extend_from_slice(
                &serde_json::to_vec(p).map_err(|e| Error::Storage(format!("serialize: {e}")))?,
            );
            out.push(b'\n');
        }
        std::fs::write(out_dir.join(PREDICTIONS_FILE), out)?;
        Ok(RunOutcome {
            predictions,
            manifest,
        })
    }

    fn build_manifest(
        &self,
        dataset: &NormalizedDataset,
        completed: &HashMap<String, Prediction>,
        interrupted: bool,
        started_at: chrono::DateTime<chrono::Utc>,
    ) -> Result<RunManifest> {
        let mut config = self.cfg.clone();
        config.captioner.auth_token = None;
        config.reasoner.auth_token = None;
        Ok(RunManifest {
            schema_version: 1,
            dataset_name: dataset.dataset_name.clone(),
            n_records: dataset.len(),
            n_completed: completed.len(),
            n_failed: completed.values().filter(|p| p.failed).count(),
            n_unparsed: completed
                .values()
                .filter(|p| p.answer_index.is_none())
                .count(),
            interrupted,
            started_at,
            finished_at: chrono::Utc::now(),
            caption_template_id: self.cfg.caption_template_id.clone(),
            caption_template_body: self
                .registry
                .get(&self.cfg.caption_template_id)?
                .body
                .clone(),
            qa_template_id: self.cfg.qa_template_id.clone(),
            qa_template_body: self.registry.get(&self.cfg.qa_template_id)?.body.clone(),
            captioner_model_id: self.cfg.captioner.model_id.clone(),
            reasoner_model_id: self.cfg.reasoner.model_id.clone(),
            config,
        })
    }
}

/// Reads a prediction file (one JSON object per line).
pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let mut predictions = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line).map_err(|e| {
            Error::Validation(format!("{}: line {}: {e}", path.display(), lineno + 1))
        })?;
        predictions.push(p);
    }
    if predictions.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no predictions",
            path.display()
        )));
    }
    Ok(predictions)
}

/// Extracts a 0-based option index from raw reasoner output.
///
/// Rules apply in order, first hit wins; the function is total and never
/// errors — anything unmatched is `None` (scored as incorrect downstream):
///
/// 1. the trimmed output is exactly one valid letter, optionally wrapped in
///    `()`/`[]` or followed by `:`/`.`;
/// 2. the output contains `Option X` / `Answer: X` / `(X)` (case-insensitive)
///    with `X` a valid letter — the earliest such occurrence wins;
/// 3. the trimmed output equals one option's text, case-insensitively;
/// 4. otherwise unparsed.
pub fn parse_answer(raw: &str, m: usize, options: &[String]) -> Option<usize> {
    let m = m.min(crate::types::MAX_OPTIONS);
    let valid = |ch: char| -> Option<usize> { crate::types::index_for_letter(ch, m).ok() };

    // rule 1: bare letter with light decoration
    let trimmed = raw.trim();
    let stripped = strip_decoration(trimmed);
    if stripped.chars().count() == 1 {
        let ch = stripped.chars().next().expect("one char");
        if let Some(idx) = valid(ch) {
            return Some(idx);
        }
    }

    // rule 2: letter named inside prose; earliest match across the three
    // patterns wins
    let mut earliest: Option<(usize, usize)> = None; // (byte pos, index)
    for re in prose_patterns() {
        for caps in re.captures_iter(raw) {
            let whole = caps.get(0).expect("match");
            let letter = caps
                .iter()
                .skip(1)
                .flatten()
                .next()
                .and_then(|g| g.as_str().chars().next());
            if let Some(idx) = letter.and_then(valid) {
                if earliest.map(|(pos, _)| whole.start() < pos).unwrap_or(true) {
                    earliest = Some((whole.start(), idx));
                }
            }
        }
    }
    if let Some((_, idx)) = earliest {
        return Some(idx);
    }

    // rule 3: verbatim option text
    let lowered = trimmed.to_lowercase();
    if let Some(idx) = options
        .iter()
        .take(m)
        .position(|opt| opt.trim().to_lowercase() == lowered)
    {
        return Some(idx);
    }

    None
}

/// Strips one layer of wrapping/punctuation from a rule-1 candidate:
/// trailing `:`/`.`, matching `()`/`[]`, then another trailing `:`/`.`.
fn strip_decoration(s: &str) -> &str {
    let s = s.strip_suffix([':', '.']).unwrap_or(s);
    let s = if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        inner
    } else if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        inner
    } else {
        s
    };
    s.strip_suffix([':', '.']).unwrap_or(s).trim()
}

fn prose_patterns() -> &'static [regex::Regex; 3] {
    static RES: std::sync::OnceLock<[regex::Regex; 3]> = std::sync::OnceLock::new();
    RES.get_or_init(|| {
        [
            regex::Regex::new(r"(?i)\boption\s+([A-Za-z])\b").expect("static regex"),
            regex::Regex::new(r"(?i)\banswer\s*:\s*\(?\[?([A-Za-z])\b").expect("static regex"),
            regex::Regex::new(r"\(([A-Za-z])\)").expect("static regex"),
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opts(texts: &[&str]) -> Vec<String> {
        texts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rule1_bare_letters() {
        let o = opts(&["x", "y", "z"]);
        assert_eq!(parse_answer("B", 3, &o), Some(1));
        assert_eq!(parse_answer("  c \n", 3, &o), Some(2));
        assert_eq!(parse_answer("(B)", 3, &o), Some(1));
        assert_eq!(parse_answer("[a]", 3, &o), Some(0));
        assert_eq!(parse_answer("B.", 3, &o), Some(1));
        assert_eq!(parse_answer("B:", 3, &o), Some(1));
        assert_eq!(parse_answer("(C).", 3, &o), Some(2));
        assert_eq!(parse_answer("D", 3, &o), None); // beyond m
    }

    #[test]
    fn rule2_prose_patterns() {
        let o = opts(&["w", "x", "y", "z"]);
        assert_eq!(parse_answer("The correct answer is (C).", 4, &o), Some(2));
        assert_eq!(parse_answer("Option B", 4, &o), Some(1));
        assert_eq!(parse_answer("I pick option d here", 4, &o), Some(3));
        assert_eq!(parse_answer("Answer: C", 4, &o), Some(2));
        assert_eq!(parse_answer("answer:b", 4, &o), Some(1));
        // earliest match wins across patterns
        assert_eq!(
            parse_answer("Answer: A, though Option B also fits", 4, &o),
            Some(0)
        );
        assert_eq!(parse_answer("(B) then Answer: C", 4, &o), Some(1));
        // invalid letters are skipped in favor of later valid ones
        assert_eq!(
            parse_answer("Option Z is absent, so Option A", 4, &o),
            Some(0)
        );
    }

    #[test]
    fn rule2_does_not_fire_inside_words() {
        let o = opts(&["x", "y"]);
        assert_eq!(parse_answer("the adoption Agency", 2, &o), None);
        assert_eq!(parse_answer("Answer: Because of rain", 2, &o), None);
    }

    #[test]
    fn rule3_option_text_match() {
        let o = opts(&["a garage", "a kitchen", "a park"]);
        assert_eq!(parse_answer("a kitchen", 3, &o), Some(1));
        assert_eq!(parse_answer("  A Kitchen ", 3, &o), Some(1));
    }

    #[test]
    fn rule4_unparsed() {
        let o = opts(&["u", "v", "w", "x", "y"]);
        assert_eq!(parse_answer("I cannot tell.", 5, &o), None);
        assert_eq!(parse_answer("", 5, &o), None);
        assert_eq!(parse_answer("maybe the first one?", 5, &o), None);
    }

    #[test]
    fn rule_order_is_fixed() {
        // a bare letter beats a later prose mention
        let o = opts(&["Option B", "b"]);
        assert_eq!(parse_answer("A", 2, &o), Some(0));
        // prose beats option-text equality
        let o2 = opts(&["the answer: b text", "other"]);
        assert_eq!(parse_answer("the answer: b text", 2, &o2), Some(1));
    }

    proptest! {
        #[test]
        fn parse_answer_is_total(raw in ".{0,200}", m in 2usize..27) {
            let options: Vec<String> = (0..m).map(|i| format!("opt {i}")).collect();
            if let Some(idx) = parse_answer(&raw, m, &options) {
                prop_assert!(idx < m);
            }
        }
    }
}
