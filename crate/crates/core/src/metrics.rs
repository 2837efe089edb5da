//! Ambiguity-detection scorers and threshold-free / threshold-swept metrics.
//!
//! Higher scores mean "more ambiguous" throughout.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::shapley::AttributionReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no positive labels")]
    NoPositives,
    #[error("no negative labels")]
    NoNegatives,
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
    #[error("unknown scorer {0:?}")]
    UnknownScorer(String),
}

/// Aggregates of an [`AttributionReport`] used as detection signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    /// `Σ_k φ_k`
    #[serde(rename = "shaq-total")]
    ShapleyTotal,
    /// `max_k φ_k`
    #[serde(rename = "shaq-max")]
    ShapleyMax,
    /// `Σ_k φ^LOO_k`
    LooTotal,
    /// `max_k φ^LOO_k`
    LooMax,
    /// `v(N)` read directly from the ledger
    MiTotal,
}

impl Scorer {
    pub const ALL: [Scorer; 5] = [
        Scorer::ShapleyTotal,
        Scorer::ShapleyMax,
        Scorer::LooTotal,
        Scorer::LooMax,
        Scorer::MiTotal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::ShapleyTotal => "shaq-total",
            Scorer::ShapleyMax => "shaq-max",
            Scorer::LooTotal => "loo-total",
            Scorer::LooMax => "loo-max",
            Scorer::MiTotal => "mi-total",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scorer {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scorer::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| MetricsError::UnknownScorer(s.to_string()))
    }
}

/// Reports without spans score 0 under every scorer.
pub fn score_example(report: &AttributionReport, scorer: Scorer) -> f64 {
    match scorer {
        Scorer::ShapleyTotal => report.shapley_sum(),
        Scorer::ShapleyMax => report.max_shapley(),
        Scorer::LooTotal => report.loo_sum(),
        Scorer::LooMax => report.max_loo(),
        Scorer::MiTotal => report.total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestF1 {
    pub f1: f64,
    /// Predict ambiguous when `score >= threshold`.
    pub threshold: f64,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite { index });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    Ok((positives, labels.len() - positives))
}

/// Groups of tied scores, highest first, as `(score, positives, negatives)`.
fn descending_groups(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let (pos, neg) = if labels[i] { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += pos;
                g.2 += neg;
            }
            _ => groups.push((scores[i], pos, neg)),
        }
    }
    groups
}

/// Maximum F1 over thresholds at every distinct score. Ties go to the lowest
/// threshold.
pub fn best_f1(scores: &[f64], labels: &[bool]) -> Result<BestF1, MetricsError> {
    let (positives, _) = check(scores, labels)?;
    let mut best = BestF1 {
        f1: -1.0,
        threshold: f64::NAN,
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    for (score, pos, neg) in descending_groups(scores, labels) {
        tp += pos;
        fp += neg;
        let fn_ = positives - tp;
        let f1 = (2 * tp) as f64 / (2 * tp + fp + fn_) as f64;
        if f1 >= best.f1 {
            best = BestF1 {
                f1,
                threshold: score,
            };
        }
    }
    Ok(best)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    let (positives, negatives) = check(scores, labels)?;
    if negatives == 0 {
        return Err(MetricsError::NoNegatives);
    }
    // Walk groups from the lowest score up, counting negatives strictly below.
    let mut wins = 0.0;
    let mut negatives_below = 0usize;
    for (_, pos, neg) in descending_groups(scores, labels).into_iter().rev() {
        wins += pos as f64 * (negatives_below as f64 + 0.5 * neg as f64);
        negatives_below += neg;
    }
    Ok(wins / (positives as f64 * negatives as f64))
}

/// Step-wise average precision `Σ (R_i − R_{i−1}) · P_i` over descending
/// distinct thresholds.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    let (positives, _) = check(scores, labels)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (_, pos, neg) in descending_groups(scores, labels) {
        tp += pos;
        fp += neg;
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}
