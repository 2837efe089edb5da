//! Text blocks that hand numeric uncertainty feedback to a rewriting model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::shapley::AttributionReport;

/// Whether the rewriter sees span-level scores or only the query score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    Baseline,
    Localized,
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "localized" => Ok(Self::Localized),
            other => Err(format!("unknown clarification mode {other:?}")),
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::Localized => "localized",
        })
    }
}

/// Summary statistics of a score population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Population variance.
    pub variance: f64,
    pub threshold: f64,
}

impl ScoreStats {
    /// `threshold` defaults to the mean when not supplied. An empty
    /// population yields all zeros.
    pub fn from_scores(scores: &[f64], threshold: Option<f64>) -> Self {
        if scores.is_empty() {
            return Self {
                min: 0.0,
                max: 0.0,
                mean: 0.0,
                median: 0.0,
                variance: 0.0,
                threshold: threshold.unwrap_or(0.0),
            };
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let variance = sorted.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
        Self {
            min: sorted[0],
            max: sorted[n - 1],
            mean,
            median,
            variance,
            threshold: threshold.unwrap_or(mean),
        }
    }
}

/// Scores from a previous detection run that situate one query's total.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScores {
    pub scores: Vec<f64>,
    /// Best-F1 threshold of that run, if known.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyContext {
    /// Query-level block.
    pub query: String,
    /// Span-level block, present only in localized mode with spans.
    pub spans: Option<String>,
}

impl fmt::Display for UncertaintyContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.query)?;
        if let Some(spans) = &self.spans {
            write!(f, "\n{spans}")?;
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

pub fn query_block(query_ambiguity: f64, stats: &ScoreStats) -> String {
    format!(
        "Numeric uncertainty scores:\n\
         query_ambiguity: {} ,\n\
         query_ambiguity_stats:\n\
         \"min\": {} ,\n\
         \"max\": {} ,\n\
         \"mean\": {} ,\n\
         \"median\": {} ,\n\
         \"variance\": {} ,\n\
         \"threshold\": {} ,\n",
        num(query_ambiguity),
        num(stats.min),
        num(stats.max),
        num(stats.mean),
        num(stats.median),
        num(stats.variance),
        num(stats.threshold),
    )
}

/// `spans` pairs each span's display text with its Shapley value; lines are
/// numbered from 1.
pub fn span_block(stats: &ScoreStats, spans: &[(String, f64)]) -> String {
    let mut out = format!(
        "Fine Grained uncertainty scores:\n\
         span_ambiguity_stats:\n\
         \t{{\"min\": {},\n\
         \t\"max\": {},\n\
         \t\"mean\": {},\n\
         \t\"median\": {},\n\
         \t\"variance\": {},\n\
         \t\"threshold\": {}}}\n\n",
        num(stats.min),
        num(stats.max),
        num(stats.mean),
        num(stats.median),
        num(stats.variance),
        num(stats.threshold),
    );
    for (i, (text, phi)) in spans.iter().enumerate() {
        out.push_str(&format!(
            "Span {}: text='{}'; ambiguity= {},\n",
            i + 1,
            text,
            num(*phi)
        ));
    }
    out
}

/// Builds the feedback shown to the rewriter. `span_texts` must align with
/// the report's spans.
pub fn uncertainty_context(
    report: &AttributionReport,
    span_texts: &[String],
    reference: &ReferenceScores,
    mode: ContextMode,
) -> UncertaintyContext {
    debug_assert_eq!(span_texts.len(), report.span_count());
    let population: &[f64] = if reference.scores.is_empty() {
        std::slice::from_ref(&report.total)
    } else {
        &reference.scores
    };
    let query = query_block(
        report.total,
        &ScoreStats::from_scores(population, reference.threshold),
    );
    let spans = match mode {
        ContextMode::Localized if report.span_count() > 0 => {
            let lines: Vec<(String, f64)> = span_texts
                .iter()
                .cloned()
                .zip(report.shapley.iter().copied())
                .collect();
            Some(span_block(
                &ScoreStats::from_scores(&report.shapley, None),
                &lines,
            ))
        }
        _ => None,
    };
    UncertaintyContext { query, spans }
}
