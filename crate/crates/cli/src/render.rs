use std::fmt::Write as _;

use spanshap_pipeline::clarify::ClarificationOutcome;
use spanshap_pipeline::RunOutcome;

pub const NO_AMBIGUITY: &str = "no ambiguity located, total = 0";

/// Span table with attributions in nats and their share of the total.
pub fn attribution_table(outcome: &RunOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run {}", outcome.run_id);
    let report = &outcome.report;
    if outcome.spans.is_empty() {
        let _ = writeln!(out, "{NO_AMBIGUITY}");
        return out;
    }
    let texts: Vec<String> = outcome.spans.iter().map(|s| format!("{:?}", s.display_text())).collect();
    let width = texts.iter().map(String::len).max().unwrap_or(0).max(4);
    let _ = writeln!(out, "{:<4}  {:<width$}  {:>12}  {:>12}  {:>7}", "span", "text", "phi (nats)", "loo (nats)", "share");
    for (k, text) in texts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<4}  {:<width$}  {:>12.4}  {:>12.4}  {:>6.1}%",
            k + 1,
            text,
            report.shapley[k],
            report.loo[k],
            100.0 * report.share(k)
        );
    }
    let _ = writeln!(
        out,
        "total = {:.4} nats (root entropy {:.4}, residual {:.4})",
        report.total, report.root_entropy, report.residual_entropy
    );
    out
}

pub fn outcome_summary(o: &ClarificationOutcome) -> String {
    format!(
        "original: {}\nrevised:  {}\ndelta H = {:.4} nats ({:.4} -> {:.4}), edit distance = {} words\n",
        o.original, o.revised, o.delta_entropy, o.before_root_entropy, o.after_root_entropy, o.edit_distance
    )
}
