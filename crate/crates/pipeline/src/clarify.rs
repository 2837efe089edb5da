//! Uncertainty-guided rewriting and its evaluation.

use serde::{Deserialize, Serialize};
use spanshap_core::{uncertainty_context, word_edit_distance, ContextMode, ReferenceScores, UncertaintyContext};

use crate::backend::Role;
use crate::error::{Result, Stage};
use crate::parse;
use crate::pipeline::{AttributionRequest, Pipeline, RunManifest, RunOutcome};
use crate::prompts::{PromptKind, PromptSet};
use crate::stages::{CallRecord, StageContext};

/// Before/after comparison of one rewrite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarificationOutcome {
    pub original: String,
    pub revised: String,
    /// `H(Y | x) - H(Y | x')`, nats. Negative when the rewrite adds uncertainty.
    pub delta_entropy: f64,
    /// Word-level Levenshtein distance between the two inputs.
    pub edit_distance: usize,
    pub before_run_id: String,
    pub after_run_id: String,
    pub before_root_entropy: f64,
    pub after_root_entropy: f64,
}

impl ClarificationOutcome {
    pub fn compare(before: &RunOutcome, after: &RunOutcome) -> Self {
        Self {
            original: before.input.clone(),
            revised: after.input.clone(),
            delta_entropy: before.report.root_entropy - after.report.root_entropy,
            edit_distance: word_edit_distance(&before.input, &after.input),
            before_run_id: before.run_id.clone(),
            after_run_id: after.run_id.clone(),
            before_root_entropy: before.report.root_entropy,
            after_root_entropy: after.report.root_entropy,
        }
    }
}

/// One model-driven clarification round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarificationRound {
    pub mode: ContextMode,
    pub context: UncertaintyContext,
    pub outcome: ClarificationOutcome,
    pub before: RunOutcome,
    pub after: RunOutcome,
    pub calls: Vec<CallRecord>,
}

const LABELS: &[&str] = &["rewritten question:", "revised question:", "question:"];

/// Accepts exactly one non-empty question line.
pub fn parse_rewrite(text: &str) -> std::result::Result<String, String> {
    let lines: Vec<&str> = parse::strip_fence(text)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let line = match lines.as_slice() {
        [] => return Err("empty rewrite".into()),
        [one] => *one,
        _ => return Err(format!("expected one question, got {} lines", lines.len())),
    };
    let mut line = line;
    for label in LABELS {
        if line.len() >= label.len() && line.is_char_boundary(label.len()) && line[..label.len()].eq_ignore_ascii_case(label) {
            line = line[label.len()..].trim();
            break;
        }
    }
    let line = line
        .strip_prefix('"')
        .and_then(|l| l.strip_suffix('"'))
        .unwrap_or(line)
        .trim();
    if line.is_empty() {
        return Err("empty rewrite".into());
    }
    if line.matches('?').count() > 1 {
        return Err("more than one question".into());
    }
    Ok(line.to_string())
}

/// Builds the feedback block for a run.
pub fn context_for(outcome: &RunOutcome, reference: &ReferenceScores, mode: ContextMode) -> UncertaintyContext {
    let texts: Vec<String> = outcome.spans.iter().map(|s| s.display_text().to_string()).collect();
    uncertainty_context(&outcome.report, &texts, reference, mode)
}

/// Asks the clarifier for one rewritten input.
pub fn request_clarification(
    ctx: StageContext<'_>,
    original: &str,
    context: &UncertaintyContext,
    mode: ContextMode,
) -> Result<(String, Vec<CallRecord>)> {
    let kind = match mode {
        ContextMode::Baseline => PromptKind::ClarifyBaseline,
        ContextMode::Localized => PromptKind::ClarifyLocalized,
    };
    let prompt = ctx.prompts.render(
        kind,
        &[
            ("original_question", original),
            ("uncertainty_context", &context.query),
            ("fine_grained_context", context.spans.as_deref().unwrap_or("")),
        ],
    )?;
    let mut calls = Vec::new();
    let revised = ctx.call(
        Stage::Clarify,
        Role::Clarifier,
        &prompt,
        ctx.config.clarifier_temperature,
        0,
        &mut calls,
        parse_rewrite,
    )?;
    Ok((revised, calls))
}

impl Pipeline {
    /// Attributes `revised` under the same input context and config as the
    /// stored run `before_run_id` and records the comparison with that run.
    pub fn revise(&self, before_run_id: &str, revised: &str) -> Result<(ClarificationOutcome, RunOutcome)> {
        let manifest: RunManifest = self.store().manifest(before_run_id)?;
        let before = self.load(before_run_id)?;
        let request = AttributionRequest {
            input: revised.to_string(),
            context: manifest.context,
            config: manifest.config,
        };
        let after = self.run(&request)?;
        let outcome = ClarificationOutcome::compare(&before, &after);
        self.store().append_clarification(before_run_id, &outcome)?;
        Ok((outcome, after))
    }

    /// Runs `original` and `revised` under the same config.
    pub fn evaluate_clarification(
        &self,
        original: &AttributionRequest,
        revised: &str,
    ) -> Result<ClarificationOutcome> {
        let before = self.run(original)?;
        self.revise(&before.run_id, revised).map(|(o, _)| o)
    }

    /// Attributes the input, asks the clarifier for a rewrite guided by the
    /// result, and evaluates the rewrite.
    pub fn clarify(
        &self,
        request: &AttributionRequest,
        mode: ContextMode,
        reference: &ReferenceScores,
    ) -> Result<ClarificationRound> {
        let before = self.run(request)?;
        let context = context_for(&before, reference, mode);
        let prompts = PromptSet::load(&request.config.prompt_set)?;
        let ctx = StageContext {
            backend: self.backend(),
            prompts: &prompts,
            config: &request.config,
        };
        let (revised, calls) = request_clarification(ctx, &request.input, &context, mode)?;
        let (outcome, after) = self.revise(&before.run_id, &revised)?;
        Ok(ClarificationRound {
            mode,
            context,
            outcome,
            before,
            after,
            calls,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rewrite_parsing() {
        assert_eq!(parse_rewrite("Who won the 2018 FIFA World Cup?\n").unwrap(), "Who won the 2018 FIFA World Cup?");
        assert_eq!(parse_rewrite("Rewritten question: \"Who won?\"").unwrap(), "Who won?");
        assert!(parse_rewrite("   ").is_err());
        assert!(parse_rewrite("Who won?\nWhen?").is_err());
        assert!(parse_rewrite("Who won? Or who lost?").is_err());
    }
}
