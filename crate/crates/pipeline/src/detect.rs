//! Ambiguity detection over labeled datasets.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spanshap_core::{auprc, auroc, best_f1, score_example, ReferenceScores, Scorer};

use crate::error::{PipelineError, Result};
use crate::pipeline::{AttributionRequest, Pipeline};
use crate::config::PipelineConfig;

/// What the model is asked about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Question { question: String },
    Pair { premise: String, hypothesis: String },
}

impl Payload {
    /// The text handed to the pipeline.
    pub fn input(&self) -> String {
        match self {
            Payload::Question { question } => question.clone(),
            Payload::Pair { premise, hypothesis } => format!("Premise: {premise}\nHypothesis: {hypothesis}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    #[serde(flatten)]
    pub payload: Payload,
    pub ambiguous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<serde_json::Value>,
}

/// Reads a JSON-lines dataset. Blank lines are skipped.
pub fn load_dataset(path: &Path) -> Result<Vec<LabeledExample>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    parse_dataset(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

pub fn parse_dataset(text: &str) -> std::result::Result<Vec<LabeledExample>, String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledExample = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
        if ex.payload.input().trim().is_empty() {
            return Err(format!("line {}: empty payload", n + 1));
        }
        if !seen.insert(ex.id.clone()) {
            return Err(format!("line {}: duplicate id {:?}", n + 1, ex.id));
        }
        out.push(ex);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub example_id: String,
    pub scorer: Scorer,
    /// Nats.
    pub score: f64,
    pub ambiguous: bool,
    pub span_count: usize,
    pub run_id: String,
}

/// One scorer's detection quality. Metrics undefined for the label set are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scorer: Scorer,
    pub examples: usize,
    pub positives: usize,
    pub f1: Option<f64>,
    pub threshold: Option<f64>,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleFailure {
    pub example_id: String,
    pub stage: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub rows: Vec<MetricsRow>,
    pub records: Vec<ScoreRecord>,
    /// Excluded because the pipeline failed; never imputed.
    pub failures: Vec<ExampleFailure>,
    /// Excluded by the minimum span filter.
    pub filtered: usize,
    pub min_spans: usize,
}

#[derive(Debug, Clone)]
pub struct DetectionOptions {
    pub config: PipelineConfig,
    pub scorers: Vec<Scorer>,
    /// Score only examples with at least this many located spans.
    pub min_spans: usize,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        Self {
            config: PipelineConfig::default(),
            scorers: Scorer::ALL.to_vec(),
            min_spans: 0,
        }
    }
}

/// Computes a metrics row from parallel score and label lists.
pub fn metrics_row(scorer: Scorer, scores: &[f64], labels: &[bool]) -> MetricsRow {
    let f1 = best_f1(scores, labels).ok();
    MetricsRow {
        scorer,
        examples: scores.len(),
        positives: labels.iter().filter(|&&l| l).count(),
        f1: f1.map(|b| b.f1),
        threshold: f1.map(|b| b.threshold),
        auroc: auroc(scores, labels).ok(),
        auprc: auprc(scores, labels).ok(),
    }
}

/// Attributes every example and scores it with each scorer.
pub fn run_detection(pipeline: &Pipeline, examples: &[LabeledExample], options: &DetectionOptions) -> DetectionReport {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut filtered = 0;
    for ex in examples {
        let request = AttributionRequest {
            input: ex.payload.input(),
            context: None,
            config: options.config.clone(),
        };
        match pipeline.run(&request) {
            Err(e) => {
                tracing::warn!(example = %ex.id, error = %e, "example failed");
                failures.push(ExampleFailure {
                    example_id: ex.id.clone(),
                    stage: e.stage().map(|s| s.name().to_string()),
                    message: e.to_string(),
                });
            }
            Ok(outcome) if outcome.spans.len() < options.min_spans => filtered += 1,
            Ok(outcome) => {
                for &scorer in &options.scorers {
                    records.push(ScoreRecord {
                        example_id: ex.id.clone(),
                        scorer,
                        score: score_example(&outcome.report, scorer),
                        ambiguous: ex.ambiguous,
                        span_count: outcome.spans.len(),
                        run_id: outcome.run_id.clone(),
                    });
                }
            }
        }
    }
    let rows = options
        .scorers
        .iter()
        .map(|&scorer| {
            let (scores, labels): (Vec<f64>, Vec<bool>) = records
                .iter()
                .filter(|r| r.scorer == scorer)
                .map(|r| (r.score, r.ambiguous))
                .unzip();
            metrics_row(scorer, &scores, &labels)
        })
        .collect();
    DetectionReport {
        rows,
        records,
        failures,
        filtered,
        min_spans: options.min_spans,
    }
}

fn cell(v: Option<f64>, percent: bool) -> String {
    match v {
        Some(x) if percent => format!("{:.2}", 100.0 * x),
        Some(x) => format!("{x:.4}"),
        None => "n/a".to_string(),
    }
}

/// Aligned plain-text table; F1, AUROC and AUPRC in percent, threshold in nats.
pub fn render_table(report: &DetectionReport) -> String {
    let header = ["scorer", "n", "pos", "F1", "AUROC", "AUPRC", "threshold (nats)"];
    let rows: Vec<[String; 7]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.scorer.to_string(),
                r.examples.to_string(),
                r.positives.to_string(),
                cell(r.f1, true),
                cell(r.auroc, true),
                cell(r.auprc, true),
                cell(r.threshold, false),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    for row in &rows {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let _ = writeln!(
        out,
        "excluded: {} failed, {} below {} spans",
        report.failures.len(),
        report.filtered,
        report.min_spans
    );
    out
}

/// Writes `metrics.json`, `metrics.txt` and `scores.jsonl` into `dir`.
pub fn write_outputs(dir: &Path, report: &DetectionReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let metrics = serde_json::json!({
        "rows": report.rows,
        "failures": report.failures,
        "filtered": report.filtered,
        "min_spans": report.min_spans,
    });
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)? + "\n")?;
    std::fs::write(dir.join("metrics.txt"), render_table(report))?;
    let mut lines = String::new();
    for r in &report.records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    std::fs::write(dir.join("scores.jsonl"), lines)
}

/// Scores and best-F1 threshold of one scorer from a previous detection
/// output directory, for situating a query in clarification feedback.
pub fn load_reference(dir: &Path, scorer: Scorer) -> Result<ReferenceScores> {
    let read = |name: &str| {
        std::fs::read_to_string(dir.join(name))
            .map_err(|e| PipelineError::Input(format!("{}: {e}", dir.join(name).display())))
    };
    let mut scores = Vec::new();
    for line in read("scores.jsonl")?.lines().filter(|l| !l.trim().is_empty()) {
        let r: ScoreRecord = serde_json::from_str(line).map_err(|e| PipelineError::Input(e.to_string()))?;
        if r.scorer == scorer {
            scores.push(r.score);
        }
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&read("metrics.json")?).map_err(|e| PipelineError::Input(e.to_string()))?;
    let threshold = metrics["rows"]
        .as_array()
        .into_iter()
        .flatten()
        .find(|r| r["scorer"] == scorer.name())
        .and_then(|r| r["threshold"].as_f64());
    Ok(ReferenceScores { scores, threshold })
}
