//! Benchmark ingestion: five adapters into one normalized record format,
//! plus validation and a deterministic synthetic fixture generator.
//!
//! Normalized files are UTF-8 JSONL, one record per line:
//!
//! ```json
//! {"record_id":"...","dataset":"...","video_id":"...",
//!  "video":{"kind":"video_file","path":"...","start_s":null,"end_s":null},
//!  "question":"...","options":["...","..."],"gold_index":0,"question_type":null}
//! ```
//!
//! Paths inside the file are relative to a media root supplied at load time.
//! Adapters target each benchmark's published annotation layout and fail
//! loudly (naming the missing column or field) when the input drifts;
//! individual rows are dropped only on irrecoverable corruption, and every
//! drop is reported.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{QARecord, VideoRef, VideoSource, MAX_OPTIONS};

/// Dataset split the annotations came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Whether every record carries the same option count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionCountMode {
    Fixed(usize),
    Variable,
}

/// A validated, immutable dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDataset {
    pub dataset_name: String,
    pub split: Option<Split>,
    pub option_count_mode: OptionCountMode,
    pub records: Vec<QARecord>,
}

impl NormalizedDataset {
    fn from_records(dataset_name: String, split: Option<Split>, records: Vec<QARecord>) -> Self {
        let mode = match records.split_first() {
            Some((first, rest)) => {
                let m = first.options.len();
                if rest.iter().all(|r| r.options.len() == m) {
                    OptionCountMode::Fixed(m)
                } else {
                    OptionCountMode::Variable
                }
            }
            None => OptionCountMode::Variable,
        };
        Self {
            dataset_name,
            split,
            option_count_mode: mode,
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record counts per question type; untyped records under `None`.
    pub fn per_type_counts(&self) -> BTreeMap<Option<String>, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.question_type.clone()).or_insert(0) += 1;
        }
        counts
    }
}

// ---------------------------------------------------------------------------
// normalized JSONL schema

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordLine {
    record_id: String,
    dataset: String,
    video_id: String,
    video: VideoLine,
    question: String,
    options: Vec<String>,
    gold_index: Option<usize>,
    question_type: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VideoLine {
    kind: VideoKind,
    path: String,
    start_s: Option<f64>,
    end_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum VideoKind {
    VideoFile,
    FrameDir,
}

fn record_to_line(record: &QARecord, media_root: Option<&Path>) -> Result<RecordLine> {
    let (kind, path) = match &record.video.source {
        VideoSource::VideoFile { path } => (VideoKind::VideoFile, path),
        VideoSource::FrameDir { path } => (VideoKind::FrameDir, path),
    };
    let rel = match media_root {
        Some(root) => path
            .strip_prefix(root)
            .map_err(|_| {
                Error::Validation(format!(
                    "record {}: video path {} is not under media root {}",
                    record.record_id,
                    path.display(),
                    root.display()
                ))
            })?
            .to_path_buf(),
        None => path.clone(),
    };
    Ok(RecordLine {
        record_id: record.record_id.clone(),
        dataset: record.dataset.clone(),
        video_id: record.video.video_id.clone(),
        video: VideoLine {
            kind,
            path: rel.to_string_lossy().into_owned(),
            start_s: record.video.start_s,
            end_s: record.video.end_s,
        },
        question: record.question.clone(),
        options: record.options.clone(),
        gold_index: record.gold_index,
        question_type: record.question_type.clone(),
    })
}

fn line_to_record(line: RecordLine, media_root: Option<&Path>) -> QARecord {
    let path = match media_root {
        Some(root) => root.join(&line.video.path),
        None => PathBuf::from(&line.video.path),
    };
    let source = match line.video.kind {
        VideoKind::VideoFile => VideoSource::VideoFile { path },
        VideoKind::FrameDir => VideoSource::FrameDir { path },
    };
    let mut video = VideoRef::new(line.video_id, source);
    video.start_s = line.video.start_s;
    video.end_s = line.video.end_s;
    QARecord {
        record_id: line.record_id,
        video,
        question: line.question,
        options: line.options,
        gold_index: line.gold_index,
        question_type: line.question_type,
        dataset: line.dataset,
    }
}

/// Loads and validates a normalized JSONL file.
///
/// With a media root, record paths are resolved against it and must exist.
/// All offending records are collected and reported together.
pub fn load_normalized(path: &Path, media_root: Option<&Path>) -> Result<NormalizedDataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut problems = Vec::new();
    let mut seen_ids = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("line {}: malformed JSON: {e}", lineno + 1));
                continue;
            }
        };
        let record = line_to_record(parsed, media_root);
        if let Err(e) = record.validate() {
            problems.push(format!("line {}: {e}", lineno + 1));
            continue;
        }
        if !seen_ids.insert(record.record_id.clone()) {
            problems.push(format!(
                "line {}: duplicate record_id {}",
                lineno + 1,
                record.record_id
            ));
            continue;
        }
        if media_root.is_some() {
            let exists = match &record.video.source {
                VideoSource::VideoFile { path } => path.is_file(),
                VideoSource::FrameDir { path } => path.is_dir(),
            };
            if !exists {
                problems.push(format!(
                    "line {}: record {}: missing media {}",
                    lineno + 1,
                    record.record_id,
                    record.video.source.path().display()
                ));
                continue;
            }
        }
        records.push(record);
    }
    if !problems.is_empty() {
        let shown = problems
            .iter()
            .take(20)
            .cloned()
            .collect::<Vec<_>>()
            .join("; ");
        let suffix = if problems.len() > 20 {
            format!(" (+{} more)", problems.len() - 20)
        } else {
            String::new()
        };
        return Err(Error::Validation(format!(
            "{}: {} invalid records: {shown}{suffix}",
            path.display(),
            problems.len()
        )));
    }
    if records.is_empty() {
        return Err(Error::Validation(format!("{}: no records", path.display())));
    }
    let name = records[0].dataset.clone();
    let name = if records.iter().all(|r| r.dataset == name) {
        name
    } else {
        "mixed".to_string()
    };
    Ok(NormalizedDataset::from_records(name, None, records))
}

/// Writes a dataset as normalized JSONL (LF endings). With a media root,
/// paths are stored relative to it.
pub fn save_normalized(
    dataset: &NormalizedDataset,
    path: &Path,
    media_root: Option<&Path>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in &dataset.records {
        let line = record_to_line(record, media_root)?;
        serde_json::to_writer(&mut out, &line)
            .map_err(|e| Error::Validation(format!("serialize record: {e}")))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark adapters

/// The five supported source benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    NextQa,
    Star,
    How2Qa,
    Tvqa,
    IntentQa,
}

impl std::str::FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nextqa" => Ok(SourceFormat::NextQa),
            "star" => Ok(SourceFormat::Star),
            "how2qa" => Ok(SourceFormat::How2Qa),
            "tvqa" => Ok(SourceFormat::Tvqa),
            "intentqa" => Ok(SourceFormat::IntentQa),
            other => Err(Error::Unsupported(format!(
                "source format '{other}' (expected nextqa|star|how2qa|tvqa|intentqa)"
            ))),
        }
    }
}

impl SourceFormat {
    pub fn name(self) -> &'static str {
        match self {
            SourceFormat::NextQa => "nextqa",
            SourceFormat::Star => "star",
            SourceFormat::How2Qa => "how2qa",
            SourceFormat::Tvqa => "tvqa",
            SourceFormat::IntentQa => "intentqa",
        }
    }

    /// Evaluation split used for zero-shot comparisons.
    pub fn default_split(self) -> Split {
        match self {
            SourceFormat::IntentQa => Split::Test,
            _ => Split::Val,
        }
    }
}

/// One row dropped during adaptation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DropEntry {
    pub line: usize,
    pub reason: String,
}

/// Adapter output: the normalized dataset plus the drop log.
#[derive(Debug)]
pub struct AdaptOutcome {
    pub dataset: NormalizedDataset,
    pub drops: Vec<DropEntry>,
}

/// Converts a benchmark annotation file into the normalized format.
///
/// Rows are dropped (and logged) only when they cannot be repaired; any
/// layout-level mismatch is an error naming the missing column or field.
pub fn adapt(
    format: SourceFormat,
    input: &Path,
    media_root: Option<&Path>,
) -> Result<AdaptOutcome> {
    let mut drops = Vec::new();
    let records = match format {
        SourceFormat::NextQa => adapt_nextqa_like(format, input, media_root, &mut drops)?,
        SourceFormat::IntentQa => adapt_nextqa_like(format, input, media_root, &mut drops)?,
        SourceFormat::Star => adapt_star(input, media_root, &mut drops)?,
        SourceFormat::How2Qa => adapt_how2qa(input, media_root, &mut drops)?,
        SourceFormat::Tvqa => adapt_tvqa(input, media_root, &mut drops)?,
    };
    // adapter output must always load: anything that would fail record
    // validation is dropped here, not emitted
    let mut seen = HashSet::new();
    let records: Vec<QARecord> = records
        .into_iter()
        .enumerate()
        .filter(|(i, r)| {
            if let Err(e) = r.validate() {
                drops.push(DropEntry {
                    line: i + 1,
                    reason: e.to_string(),
                });
                return false;
            }
            if !seen.insert(r.record_id.clone()) {
                drops.push(DropEntry {
                    line: i + 1,
                    reason: format!("duplicate record_id {}", r.record_id),
                });
                return false;
            }
            true
        })
        .map(|(_, r)| r)
        .collect();
    if records.is_empty() {
        return Err(Error::Adapter(format!(
            "{}: no usable records ({} dropped)",
            input.display(),
            drops.len()
        )));
    }
    Ok(AdaptOutcome {
        dataset: NormalizedDataset::from_records(
            format.name().to_string(),
            Some(format.default_split()),
            records,
        ),
        drops,
    })
}

fn resolve(media_root: Option<&Path>, rel: &str) -> PathBuf {
    match media_root {
        Some(root) => root.join(rel),
        None => PathBuf::from(rel),
    }
}

/// Shared CSV adapter for the NExT-QA family (IntentQA reuses its layout).
///
/// Expected columns: `video` (or `video_id`), `question`, `answer`, `qid`,
/// `type`, `a0`..`a4`. NExT-QA type codes collapse onto their reasoning
/// family (Temporal/Causal/Descriptive); IntentQA codes are preserved as-is.
fn adapt_nextqa_like(
    format: SourceFormat,
    input: &Path,
    media_root: Option<&Path>,
    drops: &mut Vec<DropEntry>,
) -> Result<Vec<QARecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(input)
        .map_err(|e| Error::Adapter(format!("{}: {e}", input.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Adapter(format!("{}: {e}", input.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let video_col = col("video").or_else(|| col("video_id")).ok_or_else(|| {
        Error::Adapter(format!(
            "{}: missing column video/video_id",
            input.display()
        ))
    })?;
    let required = [
        "question", "answer", "qid", "type", "a0", "a1", "a2", "a3", "a4",
    ];
    let mut cols = Vec::with_capacity(required.len());
    for name in required {
        cols.push(col(name).ok_or_else(|| {
            Error::Adapter(format!("{}: missing column {name}", input.display()))
        })?);
    }
    let [q_col, ans_col, qid_col, type_col, a0, a1, a2, a3, a4] = cols[..] else {
        unreachable!()
    };
    let prefix = format.name();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let lineno = i + 2; // header is line 1
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                drops.push(DropEntry {
                    line: lineno,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let field = |idx: usize| row.get(idx).unwrap_or("").trim().to_string();
        let video = field(video_col);
        let question = field(q_col);
        let qid = field(qid_col);
        let options: Vec<String> = [a0, a1, a2, a3, a4].iter().map(|&c| field(c)).collect();
        let gold: Option<usize> = field(ans_col).parse().ok();
        if video.is_empty() || question.is_empty() || qid.is_empty() {
            drops.push(DropEntry {
                line: lineno,
                reason: "missing video/question/qid".into(),
            });
            continue;
        }
        if options.iter().any(|o| o.is_empty()) {
            drops.push(DropEntry {
                line: lineno,
                reason: "missing option text".into(),
            });
            continue;
        }
        let Some(gold) = gold.filter(|&g| g < options.len()) else {
            drops.push(DropEntry {
                line: lineno,
                reason: format!("answer index out of range: {:?}", field(ans_col)),
            });
            continue;
        };
        let raw_type = field(type_col);
        let question_type = match format {
            // NExT-QA codes: TN/TC/TP -> Temporal, CW/CH/CC -> Causal, D* -> Descriptive
            SourceFormat::NextQa => match raw_type.chars().next() {
                Some('T' | 't') => Some("Temporal".to_string()),
                Some('C' | 'c') => Some("Causal".to_string()),
                Some('D' | 'd') => Some("Descriptive".to_string()),
                _ => (!raw_type.is_empty()).then_some(raw_type),
            },
            _ => (!raw_type.is_empty()).then_some(raw_type),
        };
        records.push(QARecord {
            record_id: format!("{prefix}_{video}_{qid}"),
            video: VideoRef::new(
                video.clone(),
                VideoSource::VideoFile {
                    path: resolve(media_root, &format!("{prefix}/{video}.mp4")),
                },
            ),
            question,
            options,
            gold_index: Some(gold),
            question_type,
            dataset: prefix.to_string(),
        });
    }
    Ok(records)
}

/// STAR ships a JSON array of situated-reasoning questions; the question id
/// prefix names the reasoning family and `choices` carry the option texts.
fn adapt_star(
    input: &Path,
    media_root: Option<&Path>,
    drops: &mut Vec<DropEntry>,
) -> Result<Vec<QARecord>> {
    #[derive(Deserialize)]
    struct StarChoice {
        choice: String,
    }
    #[derive(Deserialize)]
    struct StarQuestion {
        question_id: String,
        question: String,
        video_id: String,
        #[serde(default)]
        start: Option<f64>,
        #[serde(default)]
        end: Option<f64>,
        choices: Vec<StarChoice>,
        answer: String,
    }
    let text = std::fs::read_to_string(input)
        .map_err(|e| Error::Adapter(format!("{}: {e}", input.display())))?;
    let items: Vec<serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| Error::Adapter(format!("{}: not a JSON array: {e}", input.display())))?;
    let mut records = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        let q: StarQuestion = match serde_json::from_value(item) {
            Ok(q) => q,
            Err(e) => {
                drops.push(DropEntry {
                    line: i + 1,
                    reason: format!("missing field: {e}"),
                });
                continue;
            }
        };
        let options: Vec<String> = q
            .choices
            .iter()
            .map(|c| c.choice.trim().to_string())
            .collect();
        let Some(gold) = options.iter().position(|o| *o == q.answer.trim()) else {
            drops.push(DropEntry {
                line: i + 1,
                reason: format!("answer {:?} not among choices", q.answer),
            });
            continue;
        };
        let family = q.question_id.split('_').next().unwrap_or_default();
        let question_type = match family {
            "Interaction" | "Sequence" | "Prediction" | "Feasibility" => Some(family.to_string()),
            _ => None,
        };
        records.push(QARecord {
            record_id: format!("star_{}", q.question_id),
            video: VideoRef {
                video_id: q.video_id.clone(),
                source: VideoSource::VideoFile {
                    path: resolve(media_root, &format!("star/{}.mp4", q.video_id)),
                },
                start_s: q.start,
                end_s: q.end,
                total_frames: None,
            },
            question: q.question,
            options,
            gold_index: Some(gold),
            question_type,
            dataset: "star".to_string(),
        });
    }
    Ok(records)
}

/// How2QA (VALUE release): JSONL with `qid`, `vid_id`, `q`, `a0`..`a3`,
/// `answer_idx` and a `ts` array holding the clip span in seconds.
fn adapt_how2qa(
    input: &Path,
    media_root: Option<&Path>,
    drops: &mut Vec<DropEntry>,
) -> Result<Vec<QARecord>> {
    #[derive(Deserialize)]
    struct How2Row {
        qid: serde_json::Value,
        vid_id: String,
        q: String,
        a0: String,
        a1: String,
        a2: String,
        a3: String,
        answer_idx: usize,
        #[serde(default)]
        ts: Option<[f64; 2]>,
    }
    let mut records = Vec::new();
    for (lineno, line) in read_lines(input)?.into_iter().enumerate() {
        let row: How2Row = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                drops.push(DropEntry {
                    line: lineno + 1,
                    reason: format!("missing field: {e}"),
                });
                continue;
            }
        };
        let options = vec![row.a0, row.a1, row.a2, row.a3];
        if row.answer_idx >= options.len() {
            drops.push(DropEntry {
                line: lineno + 1,
                reason: format!("answer_idx {} out of range", row.answer_idx),
            });
            continue;
        }
        let (start_s, end_s) = match row.ts {
            Some([s, e]) => (Some(s), Some(e)),
            None => (None, None),
        };
        records.push(QARecord {
            record_id: format!("how2qa_{}", json_id(&row.qid)),
            video: VideoRef {
                video_id: row.vid_id.clone(),
                source: VideoSource::VideoFile {
                    path: resolve(media_root, &format!("how2qa/{}.mp4", row.vid_id)),
                },
                start_s,
                end_s,
                total_frames: None,
            },
            question: row.q,
            options,
            gold_index: Some(row.answer_idx),
            question_type: None,
            dataset: "how2qa".to_string(),
        });
    }
    Ok(records)
}

/// TVQA: JSONL with `qid`, `vid_name`, `q`, `a0`..`a4`, `answer_idx` and a
/// `ts` span formatted `"<start>-<end>"`. The release ships 3 fps frame
/// directories, so the video source is a frame directory.
fn adapt_tvqa(
    input: &Path,
    media_root: Option<&Path>,
    drops: &mut Vec<DropEntry>,
) -> Result<Vec<QARecord>> {
    #[derive(Deserialize)]
    struct TvqaRow {
        qid: serde_json::Value,
        vid_name: String,
        q: String,
        a0: String,
        a1: String,
        a2: String,
        a3: String,
        a4: String,
        answer_idx: usize,
        #[serde(default)]
        ts: Option<String>,
    }
    let mut records = Vec::new();
    for (lineno, line) in read_lines(input)?.into_iter().enumerate() {
        let row: TvqaRow = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                drops.push(DropEntry {
                    line: lineno + 1,
                    reason: format!("missing field: {e}"),
                });
                continue;
            }
        };
        let options = vec![row.a0, row.a1, row.a2, row.a3, row.a4];
        if row.answer_idx >= options.len() {
            drops.push(DropEntry {
                line: lineno + 1,
                reason: format!("answer_idx {} out of range", row.answer_idx),
            });
            continue;
        }
        let (start_s, end_s) = row
            .ts
            .as_deref()
            .and_then(parse_ts_span)
            .map(|(s, e)| (Some(s), Some(e)))
            .unwrap_or((None, None));
        records.push(QARecord {
            record_id: format!("tvqa_{}", json_id(&row.qid)),
            video: VideoRef {
                video_id: row.vid_name.clone(),
                source: VideoSource::FrameDir {
                    path: resolve(media_root, &format!("tvqa/frames/{}", row.vid_name)),
                },
                start_s,
                end_s,
                total_frames: None,
            },
            question: row.q,
            options,
            gold_index: Some(row.answer_idx),
            question_type: None,
            dataset: "tvqa".to_string(),
        });
    }
    Ok(records)
}

fn parse_ts_span(ts: &str) -> Option<(f64, f64)> {
    let (a, b) = ts.split_once('-')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn json_id(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Adapter(format!("{}: {e}", path.display())))?;
    std::io::BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::Adapter(format!("{}: {e}", path.display()))))
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .collect()
}

// ---------------------------------------------------------------------------
// synthetic fixtures

/// Shape of a synthetic fixture dataset.
#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub records: usize,
    /// Option counts drawn per record; singleton for a fixed-m dataset.
    pub option_counts: Vec<usize>,
    pub seed: u64,
    /// Frames written per synthetic video.
    pub min_frames: usize,
    pub max_frames: usize,
}

impl FixtureSpec {
    pub fn new(records: usize, option_counts: Vec<usize>, seed: u64) -> Self {
        Self {
            records,
            option_counts,
            seed,
            min_frames: 6,
            max_frames: 10,
        }
    }
}

/// The sentinel planted in every option text of fixture record `i`; rig
/// rules match on it to script that record's answer.
pub fn fixture_sentinel(i: usize) -> String {
    format!("sn-{i:04}#")
}

/// Generates a deterministic synthetic dataset with frame-dir videos of
/// solid-color frames. Identical (spec, seed) pairs produce byte-identical
/// media and records.
pub fn synthesize_fixture(media_root: &Path, spec: &FixtureSpec) -> Result<NormalizedDataset> {
    if spec.records == 0 {
        return Err(Error::Validation(
            "fixture needs at least one record".into(),
        ));
    }
    if spec.option_counts.is_empty() {
        return Err(Error::Validation(
            "fixture needs at least one option count".into(),
        ));
    }
    for &m in &spec.option_counts {
        if !(2..=MAX_OPTIONS).contains(&m) {
            return Err(Error::OutOfRange(m.saturating_sub(1)));
        }
    }
    if spec.min_frames == 0 || spec.min_frames > spec.max_frames {
        return Err(Error::Validation("fixture frame range is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let types = ["Temporal", "Causal", "Descriptive"];
    let nouns = [
        "lantern", "bicycle", "kettle", "ladder", "compass", "violin", "anchor", "basket",
    ];
    let mut records = Vec::with_capacity(spec.records);
    for i in 0..spec.records {
        let m = spec.option_counts[rng.gen_range(0..spec.option_counts.len())];
        let n_frames = rng.gen_range(spec.min_frames..=spec.max_frames);
        let video_id = format!("fixvid-{i:04}");
        let dir = media_root.join("videos").join(&video_id);
        std::fs::create_dir_all(&dir)?;
        for f in 0..n_frames {
            let rgb = [rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()];
            let img = image::RgbImage::from_pixel(48, 32, image::Rgb(rgb));
            let mut bytes = Vec::new();
            image::DynamicImage::ImageRgb8(img)
                .write_to(
                    &mut std::io::Cursor::new(&mut bytes),
                    image::ImageFormat::Png,
                )
                .map_err(|e| Error::Validation(format!("encode fixture frame: {e}")))?;
            std::fs::write(dir.join(format!("f{f:03}.png")), bytes)?;
        }
        let sentinel = fixture_sentinel(i);
        let gold = rng.gen_range(0..m);
        let options = (0..m)
            .map(|j| {
                let noun = nouns[rng.gen_range(0..nouns.len())];
                format!("the {noun} numbered {j} {sentinel}")
            })
            .collect();
        records.push(QARecord {
            record_id: format!("fix-{i:04}"),
            video: VideoRef::new(video_id, VideoSource::FrameDir { path: dir }),
            question: format!("What does segment {i:04} of the recording show?"),
            options,
            gold_index: Some(gold),
            question_type: Some(types[i % types.len()].to_string()),
            dataset: "fixture".to_string(),
        });
    }
    Ok(NormalizedDataset::from_records(
        "fixture".to_string(),
        None,
        records,
    ))
}
