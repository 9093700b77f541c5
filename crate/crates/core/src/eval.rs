//! Scoring, per-type breakdowns and the template-ablation matrix.
//!
//! Unparsed predictions score as incorrect and are tallied separately, so
//! reported accuracy is a lower bound and caption-hallucination failure
//! modes stay visible. Both the per-type macro average and the overall
//! micro accuracy are reported.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datasets::NormalizedDataset;
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, PipelineConfig, ProgressSink, RunOutcome};
use crate::templates::{TemplateKind, TemplateRegistry};
use crate::types::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Macro (unweighted mean of per-type accuracies) and micro (overall
/// correct-over-total) averages, both reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageBlock {
    pub macro_accuracy: Option<f64>,
    pub micro_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub dataset_name: String,
    pub n_total: usize,
    pub n_correct: usize,
    pub n_unparsed: usize,
    /// Micro accuracy: `n_correct / n_total`.
    pub accuracy: f64,
    /// Buckets keyed by question type; untyped records appear in the totals
    /// but in no bucket.
    pub per_type: BTreeMap<String, TypeStats>,
    pub average: AverageBlock,
}

/// Scores predictions against gold labels. Unparsed predictions count as
/// incorrect.
///
/// Every prediction must resolve to a distinct dataset record carrying a
/// gold label; order is irrelevant.
pub fn score(predictions: &[Prediction], dataset: &NormalizedDataset) -> Result<EvalReport> {
    score_with(predictions, dataset, false)
}

/// [`score`] with optional random-guess imputation: when enabled, each
/// unparsed prediction contributes its expected chance accuracy `1/m`
/// instead of zero, for parity experiments against setups that force a
/// guess. Counts (`n_correct`, `n_unparsed`) always reflect exact matches.
pub fn score_with(
    predictions: &[Prediction],
    dataset: &NormalizedDataset,
    impute_unparsed: bool,
) -> Result<EvalReport> {
    #[derive(Default)]
    struct Tally {
        n: usize,
        correct: usize,
        credit: f64,
    }
    let by_id: HashMap<&str, &crate::types::QARecord> = dataset
        .records
        .iter()
        .map(|r| (r.record_id.as_str(), r))
        .collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut overall = Tally::default();
    let mut n_unparsed = 0;
    let mut buckets: BTreeMap<String, Tally> = BTreeMap::new();
    for pred in predictions {
        let record = by_id.get(pred.record_id.as_str()).ok_or_else(|| {
            Error::Report(format!("prediction for unknown record {}", pred.record_id))
        })?;
        if !seen.insert(pred.record_id.as_str()) {
            return Err(Error::Report(format!(
                "duplicate prediction for record {}",
                pred.record_id
            )));
        }
        let gold = record
            .gold_index
            .ok_or_else(|| Error::Report(format!("record {} has no gold label", pred.record_id)))?;
        let correct = pred.answer_index == Some(gold);
        let mut credit = 0.0;
        if pred.answer_index.is_none() {
            n_unparsed += 1;
            if impute_unparsed {
                credit = 1.0 / record.options.len() as f64;
            }
        }
        overall.n += 1;
        overall.correct += correct as usize;
        overall.credit += credit;
        if let Some(qtype) = &record.question_type {
            let bucket = buckets.entry(qtype.clone()).or_default();
            bucket.n += 1;
            bucket.correct += correct as usize;
            bucket.credit += credit;
        }
    }
    if overall.n == 0 {
        return Err(Error::Report("no predictions to score".into()));
    }
    let stats = |t: &Tally| TypeStats {
        n: t.n,
        correct: t.correct,
        accuracy: (t.correct as f64 + t.credit) / t.n as f64,
    };
    let per_type: BTreeMap<String, TypeStats> =
        buckets.iter().map(|(k, t)| (k.clone(), stats(t))).collect();
    let macro_accuracy = if per_type.is_empty() {
        None
    } else {
        Some(per_type.values().map(|s| s.accuracy).sum::<f64>() / per_type.len() as f64)
    };
    let accuracy = (overall.correct as f64 + overall.credit) / overall.n as f64;
    Ok(EvalReport {
        schema_version: 1,
        dataset_name: dataset.dataset_name.clone(),
        n_total: overall.n,
        n_correct: overall.correct,
        n_unparsed,
        accuracy,
        per_type,
        average: AverageBlock {
            macro_accuracy,
            micro_accuracy: accuracy,
        },
    })
}

/// One cell of the ablation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub caption_template_id: String,
    pub qa_template_id: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationMatrix {
    pub schema_version: u32,
    pub dataset_name: String,
    pub caption_template_ids: Vec<String>,
    pub qa_template_ids: Vec<String>,
    pub cells: Vec<AblationCell>,
}

/// Runs the pipeline for every (captioning, QA) template pair and scores
/// each run.
///
/// All template ids are validated before any inference. Because cache keys
/// exclude the QA template, QA variants sharing a captioning template reuse
/// its captions: the captioner pays once per captioning template.
#[allow(clippy::too_many_arguments)]
pub async fn ablate(
    dataset: &NormalizedDataset,
    caption_template_ids: &[String],
    qa_template_ids: &[String],
    base_config: &PipelineConfig,
    registry: Arc<TemplateRegistry>,
    out_dir: &Path,
    progress: &dyn ProgressSink,
    cancel: &AtomicBool,
) -> Result<AblationMatrix> {
    if caption_template_ids.is_empty() || qa_template_ids.is_empty() {
        return Err(Error::Validation(
            "ablation needs at least one template id per axis".into(),
        ));
    }
    for id in caption_template_ids {
        let t = registry.get(id)?;
        if t.kind != TemplateKind::Captioning {
            return Err(Error::Config(format!(
                "'{id}' is not a captioning template"
            )));
        }
    }
    for id in qa_template_ids {
        let t = registry.get(id)?;
        if t.kind != TemplateKind::QaTask {
            return Err(Error::Config(format!("'{id}' is not a qa_task template")));
        }
    }
    let mut cells = Vec::with_capacity(caption_template_ids.len() * qa_template_ids.len());
    for caption_id in caption_template_ids {
        for qa_id in qa_template_ids {
            let mut cfg = base_config.clone();
            cfg.caption_template_id = caption_id.clone();
            cfg.qa_template_id = qa_id.clone();
            let pipeline = Pipeline::new(cfg, registry.clone())?;
            let cell_dir = out_dir.join("cells").join(format!("{caption_id}__{qa_id}"));
            let RunOutcome { predictions, .. } = pipeline
                .run_dataset(dataset, &cell_dir, false, progress, cancel)
                .await?;
            let report = score(&predictions, dataset)?;
            cells.push(AblationCell {
                caption_template_id: caption_id.clone(),
                qa_template_id: qa_id.clone(),
                report,
            });
        }
    }
    Ok(AblationMatrix {
        schema_version: 1,
        dataset_name: dataset.dataset_name.clone(),
        caption_template_ids: caption_template_ids.to_vec(),
        qa_template_ids: qa_template_ids.to_vec(),
        cells,
    })
}

/// Output format for rendered reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Plain,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(ReportFormat::Plain),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!(
                "report format '{other}' (expected plain|json)"
            ))),
        }
    }
}

/// Canonical column orders for the known question-type vocabularies.
const TYPE_ORDERS: &[&[&str]] = &[
    &["Temporal", "Causal", "Descriptive"],
    &["Interaction", "Sequence", "Prediction", "Feasibility"],
];

fn ordered_types(report: &EvalReport) -> Vec<String> {
    let present: Vec<&String> = report.per_type.keys().collect();
    for order in TYPE_ORDERS {
        if present.iter().all(|t| order.contains(&t.as_str())) {
            return order
                .iter()
                .filter(|t| report.per_type.contains_key(**t))
                .map(|t| t.to_string())
                .collect();
        }
    }
    present.into_iter().cloned().collect()
}

fn abbreviate(qtype: &str) -> String {
    if qtype.len() <= 4 {
        qtype.to_string()
    } else {
        format!("{}.", &qtype[..3])
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

/// Plain table: one column per question type, then `Avg.` (macro over the
/// type columns when they exist, micro otherwise), with a counts footer.
pub fn render_report_plain(report: &EvalReport) -> String {
    let mut header: Vec<String> = Vec::new();
    let mut row: Vec<String> = Vec::new();
    let types = ordered_types(report);
    if types.is_empty() {
        header.push("Overall".into());
        row.push(pct(report.accuracy));
    } else {
        for t in &types {
            header.push(abbreviate(t));
            row.push(pct(report.per_type[t].accuracy));
        }
        header.push("Avg.".into());
        row.push(pct(report
            .average
            .macro_accuracy
            .unwrap_or(report.average.micro_accuracy)));
    }
    let widths: Vec<usize> = header
        .iter()
        .zip(&row)
        .map(|(h, r)| h.len().max(r.len()))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", report.dataset_name);
    for (h, w) in header.iter().zip(&widths) {
        let _ = write!(out, "{h:>w$}  ", w = w);
    }
    out.push('\n');
    for (r, w) in row.iter().zip(&widths) {
        let _ = write!(out, "{r:>w$}  ", w = w);
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "n={} correct={} unparsed={} micro={} macro={}",
        report.n_total,
        report.n_correct,
        report.n_unparsed,
        pct(report.average.micro_accuracy),
        report
            .average
            .macro_accuracy
            .map(pct)
            .unwrap_or_else(|| "-".into()),
    );
    out
}

/// Plain matrix: a micro-accuracy grid (captioning rows, QA columns)
/// followed by each cell's table.
pub fn render_matrix_plain(matrix: &AblationMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", matrix.dataset_name);
    let col_width = matrix
        .qa_template_ids
        .iter()
        .map(|s| s.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap_or(5);
    let row_width = matrix
        .caption_template_ids
        .iter()
        .map(|s| s.len())
        .max()
        .unwrap_or(10);
    let _ = write!(out, "{:row_width$}", "");
    for qa in &matrix.qa_template_ids {
        let _ = write!(out, "  {qa:>col_width$}");
    }
    out.push('\n');
    for caption in &matrix.caption_template_ids {
        let _ = write!(out, "{caption:row_width$}");
        for qa in &matrix.qa_template_ids {
            let cell = matrix
                .cells
                .iter()
                .find(|c| &c.caption_template_id == caption && &c.qa_template_id == qa);
            let text = cell
                .map(|c| pct(c.report.accuracy))
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, "  {text:>col_width$}");
        }
        out.push('\n');
    }
    out.push('\n');
    for cell in &matrix.cells {
        let _ = writeln!(
            out,
            "[captioning={} qa={}]",
            cell.caption_template_id, cell.qa_template_id
        );
        out.push_str(&render_report_plain(&cell.report));
        out.push('\n');
    }
    out
}

pub fn render_report_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn render_matrix_json(matrix: &AblationMatrix) -> String {
    serde_json::to_string_pretty(matrix).expect("matrix serializes")
}
