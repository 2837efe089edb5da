//! The four model roles and the table they produce.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spanshap_core::table::Assignments;
use spanshap_core::{BottomTable, ClusterDistribution, GameError};

use crate::backend::{sha256_hex, ChatBackend, ChatRequest, Role};
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result, Stage};
use crate::parse;
use crate::prompts::{PromptKind, PromptSet};
use crate::spans::{parse_localizer_output, Span};

/// One backend call as issued, for replay and audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: Role,
    pub attempt: u32,
    pub sample_index: u32,
    pub temperature: f64,
    pub prompt_sha256: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpansArtifact {
    pub spans: Vec<Span>,
    pub calls: Vec<CallRecord>,
}

/// The premises realizing one span's clarification variable, uniformly weighted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPremises {
    pub span_id: usize,
    pub statements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremisesArtifact {
    pub premises: Vec<SpanPremises>,
    pub calls: Vec<CallRecord>,
}

impl PremisesArtifact {
    pub fn premise_counts(&self) -> Vec<usize> {
        self.premises.iter().map(|p| p.statements.len()).collect()
    }
}

/// One sampled answer with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    /// Premise index per span.
    pub assignment: Vec<usize>,
    pub sample: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswersArtifact {
    pub answers: Vec<AnswerRecord>,
    pub calls: Vec<CallRecord>,
}

/// Global clustering of the pooled answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per pooled answer, consecutive from 0 in order of first use.
    pub cluster_of: Vec<usize>,
    pub cluster_count: usize,
    /// Distinct answer strings in order of first appearance.
    pub distinct: Vec<String>,
    /// Cluster of the shared refusal outcome, if any answer was a refusal.
    pub refusal_cluster: Option<usize>,
    pub calls: Vec<CallRecord>,
}

/// What every stage needs to talk to the model.
#[derive(Clone, Copy)]
pub struct StageContext<'a> {
    pub backend: &'a dyn ChatBackend,
    pub prompts: &'a PromptSet,
    pub config: &'a PipelineConfig,
}

impl StageContext<'_> {
    /// Issues one prompt, retrying up to `max_retries` times on transport or
    /// parse failure. Every attempt is appended to `calls`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn call<T>(
        &self,
        stage: Stage,
        role: Role,
        prompt: &str,
        temperature: f64,
        sample_index: u32,
        calls: &mut Vec<CallRecord>,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        let digest = sha256_hex(prompt);
        let attempts = self.config.max_retries as u32 + 1;
        let mut last_parse = String::new();
        for attempt in 0..attempts {
            let request = ChatRequest {
                role,
                prompt: prompt.to_string(),
                temperature,
                max_tokens: self.config.max_tokens,
                samples: 1,
                sample_index,
                attempt,
            };
            let mut record = CallRecord {
                role,
                attempt,
                sample_index,
                temperature,
                prompt_sha256: digest.clone(),
                prompt: prompt.to_string(),
                completion: None,
                error: None,
            };
            match self.backend.complete(&request) {
                Err(e) => {
                    tracing::warn!(%stage, %role, attempt, error = %e, "backend call failed");
                    record.error = Some(e.to_string());
                    calls.push(record);
                    if attempt + 1 == attempts {
                        return Err(PipelineError::Backend {
                            stage,
                            what: String::new(),
                            source: e,
                        });
                    }
                }
                Ok(response) => {
                    let text = response.completions.into_iter().next().unwrap_or_default();
                    let parsed = parse(&text);
                    record.completion = Some(text);
                    if let Err(msg) = &parsed {
                        tracing::warn!(%stage, %role, attempt, error = %msg, "unusable completion");
                        record.error = Some(msg.clone());
                        last_parse = msg.clone();
                    }
                    calls.push(record);
                    if let Ok(v) = parsed {
                        return Ok(v);
                    }
                }
            }
        }
        Err(PipelineError::Parse {
            stage,
            message: last_parse,
        })
    }
}

fn context_block(context: Option<&str>) -> String {
    match context.map(str::trim).filter(|c| !c.is_empty()) {
        Some(c) => format!("Context: {c}\n\n"),
        None => String::new(),
    }
}

/// Locates ambiguous spans. Fails with a capacity error when more than
/// `max_spans` are found; the located spans are still returned in the
/// artifact for inspection.
pub fn localize(ctx: StageContext<'_>, input: &str, context: Option<&str>) -> Result<SpansArtifact> {
    let prompt = ctx.prompts.render(
        PromptKind::Localizer,
        &[("x", input), ("context", &context_block(context))],
    )?;
    let mut calls = Vec::new();
    let spans = ctx.call(
        Stage::Spans,
        Role::Localizer,
        &prompt,
        ctx.config.localizer_temperature,
        0,
        &mut calls,
        |text| parse_localizer_output(input, text).map_err(|e| e.to_string()),
    )?;
    Ok(SpansArtifact { spans, calls })
}

#[derive(Deserialize)]
struct GeneratorJson {
    premises: Vec<serde_json::Value>,
}

/// Cleans a generator's premise list: trims, drops blanks and duplicates,
/// keeps the first `m_max`.
pub fn parse_premises(text: &str, m_max: usize) -> std::result::Result<Vec<String>, String> {
    let items = parse::json_object::<GeneratorJson>(text)
        .map(|g| g.premises)
        .or_else(|| serde_json::from_str::<Vec<serde_json::Value>>(parse::strip_fence(text)).ok())
        .ok_or_else(|| "expected a JSON object with a \"premises\" array".to_string())?;
    let mut out: Vec<String> = Vec::new();
    for item in items {
        let s = match item {
            serde_json::Value::String(s) => s,
            serde_json::Value::Object(mut o) => match o.remove("premise").or_else(|| o.remove("text")) {
                Some(serde_json::Value::String(s)) => s,
                _ => continue,
            },
            _ => continue,
        };
        let s = s.trim().to_string();
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err("no premises in response".into());
    }
    if out.len() > m_max {
        tracing::warn!(returned = out.len(), kept = m_max, "generator over-returned premises");
        out.truncate(m_max);
    }
    Ok(out)
}

/// Samples premises for one span.
pub fn generate_premises(
    ctx: StageContext<'_>,
    input: &str,
    span: &Span,
    calls: &mut Vec<CallRecord>,
) -> Result<SpanPremises> {
    let m = ctx.config.premises_per_span;
    let reason = if span.reason.trim().is_empty() {
        "not stated"
    } else {
        span.reason.as_str()
    };
    let prompt = ctx.prompts.render(
        PromptKind::Generator,
        &[
            ("m", &m.to_string()),
            ("clean_sentence", input),
            ("span_id", &span.id.to_string()),
            ("span_text", span.display_text()),
            ("reason", reason),
        ],
    )?;
    let statements = ctx
        .call(
            Stage::Premises,
            Role::Generator,
            &prompt,
            ctx.config.generator_temperature,
            0,
            calls,
            |text| parse_premises(text, m),
        )
        .map_err(|e| match e {
            PipelineError::Parse { stage, message } => PipelineError::Parse {
                stage,
                message: format!("span {}: {message}", span.id),
            },
            PipelineError::Backend { stage, source, .. } => PipelineError::Backend {
                stage,
                what: format!(" for span {}", span.id),
                source,
            },
            other => other,
        })?;
    Ok(SpanPremises {
        span_id: span.id,
        statements,
    })
}

/// Premises for every span, generated independently and in parallel.
pub fn generate_all_premises(ctx: StageContext<'_>, input: &str, spans: &[Span]) -> Result<PremisesArtifact> {
    let results: Vec<(Result<SpanPremises>, Vec<CallRecord>)> = spans
        .par_iter()
        .map(|span| {
            let mut calls = Vec::new();
            let r = generate_premises(ctx, input, span, &mut calls);
            (r, calls)
        })
        .collect();
    let mut premises = Vec::with_capacity(spans.len());
    let mut calls = Vec::new();
    for (r, c) in results {
        calls.extend(c);
        premises.push(r?);
    }
    Ok(PremisesArtifact { premises, calls })
}

/// Reads one short answer from a completion.
pub fn parse_answer(text: &str) -> std::result::Result<String, String> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| "empty answer".to_string())?;
    let line = match line.get(..7) {
        Some(p) if p.eq_ignore_ascii_case("answer:") => line[7..].trim(),
        _ => line,
    };
    if line.is_empty() {
        return Err("empty answer".into());
    }
    Ok(line.to_string())
}

/// The premise lines handed to the answerer for one joint assignment.
pub fn assumptions_text(catalog: &[SpanPremises], assignment: &[usize]) -> String {
    if catalog.is_empty() {
        return "None.".to_string();
    }
    catalog
        .iter()
        .zip(assignment)
        .map(|(p, &j)| p.statements[j].as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// `ell` single-completion answers for one joint assignment.
pub fn sample_answers(
    ctx: StageContext<'_>,
    input: &str,
    catalog: &[SpanPremises],
    assignment: &[usize],
) -> Result<(Vec<AnswerRecord>, Vec<CallRecord>)> {
    let prompt = ctx.prompts.render(
        PromptKind::Answerer,
        &[
            ("clean_sentence", input),
            ("premises", &assumptions_text(catalog, assignment)),
        ],
    )?;
    let samples: Vec<(Result<String>, Vec<CallRecord>)> = (0..ctx.config.answers_per_assignment)
        .into_par_iter()
        .map(|s| {
            let mut calls = Vec::new();
            let r = ctx.call(
                Stage::Answers,
                Role::Answerer,
                &prompt,
                ctx.config.answerer_temperature,
                s as u32,
                &mut calls,
                parse_answer,
            );
            (r, calls)
        })
        .collect();
    let mut answers = Vec::with_capacity(samples.len());
    let mut calls = Vec::new();
    for (s, (r, c)) in samples.into_iter().enumerate() {
        calls.extend(c);
        let text = r.map_err(|e| match e {
            PipelineError::Backend { stage, source, .. } => PipelineError::Backend {
                stage,
                what: format!(" for assignment {assignment:?}"),
                source,
            },
            PipelineError::Parse { stage, message } => PipelineError::Parse {
                stage,
                message: format!("assignment {assignment:?}: {message}"),
            },
            other => other,
        })?;
        answers.push(AnswerRecord {
            assignment: assignment.to_vec(),
            sample: s,
            text,
        });
    }
    Ok((answers, calls))
}

/// Answers for every joint assignment, pooled in row-major assignment order.
pub fn sample_all_answers(ctx: StageContext<'_>, input: &str, catalog: &[SpanPremises]) -> Result<AnswersArtifact> {
    let radices: Vec<usize> = catalog.iter().map(|p| p.statements.len()).collect();
    let assignments: Vec<Vec<usize>> = Assignments::new(&radices).collect();
    let results: Vec<Result<(Vec<AnswerRecord>, Vec<CallRecord>)>> = assignments
        .par_iter()
        .map(|a| sample_answers(ctx, input, catalog, a))
        .collect();
    let mut answers = Vec::new();
    let mut calls = Vec::new();
    for r in results {
        let (a, c) = r?;
        answers.extend(a);
        calls.extend(c);
    }
    Ok(AnswersArtifact { answers, calls })
}

const REFUSALS: &[&str] = &[
    "unknown",
    "i don't know",
    "i dont know",
    "i do not know",
    "don't know",
    "not known",
    "n/a",
    "na",
    "no answer",
    "cannot answer",
    "can't answer",
    "i cannot answer",
    "i can't answer",
    "unanswerable",
    "not sure",
    "unsure",
    "cannot determine",
    "cannot be determined",
    "unclear",
];

/// Whether an answer declines to answer.
pub fn is_refusal(answer: &str) -> bool {
    let norm: String = answer
        .trim()
        .trim_end_matches(['.', '!'])
        .to_lowercase()
        .replace('\u{2019}', "'");
    REFUSALS.contains(&norm.as_str())
}

#[derive(Deserialize)]
struct ClustererJson {
    clusters: serde_json::Value,
}

/// Reads a clusterer mapping over `count` answers into a cluster id per answer.
pub fn parse_clusters(text: &str, count: usize) -> std::result::Result<Vec<i64>, String> {
    let json = parse::json_object::<ClustererJson>(text)
        .ok_or_else(|| "expected a JSON object with \"clusters\"".to_string())?;
    let mut out = vec![None; count];
    match json.clusters {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let i: usize = k.trim().parse().map_err(|_| format!("bad answer index {k:?}"))?;
                let id = v.as_i64().ok_or_else(|| format!("bad cluster id {v}"))?;
                let slot = out.get_mut(i).ok_or_else(|| format!("answer index {i} out of range"))?;
                *slot = Some(id);
            }
        }
        serde_json::Value::Array(groups) => {
            for (id, group) in groups.iter().enumerate() {
                let members = group.as_array().ok_or("cluster list entries must be arrays")?;
                for m in members {
                    let i = m.as_u64().ok_or_else(|| format!("bad answer index {m}"))? as usize;
                    let slot = out.get_mut(i).ok_or_else(|| format!("answer index {i} out of range"))?;
                    if slot.is_some() {
                        return Err(format!("answer {i} assigned twice"));
                    }
                    *slot = Some(id as i64);
                }
            }
        }
        _ => return Err("\"clusters\" must be an object or an array".into()),
    }
    out.into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| format!("answer {i} has no cluster")))
        .collect()
}

/// One global clustering over the pooled answers. Identical strings share a
/// cluster without asking the model; refusals form a single cluster.
pub fn cluster_answers(ctx: StageContext<'_>, question: &str, answers: &[String]) -> Result<ClusterAssignment> {
    if answers.is_empty() {
        return Err(PipelineError::Input("no answers to cluster".into()));
    }
    let mut distinct: Vec<String> = Vec::new();
    let mut distinct_of = Vec::with_capacity(answers.len());
    let mut index: HashMap<&str, usize> = HashMap::new();
    for a in answers {
        let i = *index.entry(a.as_str()).or_insert_with(|| {
            distinct.push(a.clone());
            distinct.len() - 1
        });
        distinct_of.push(i);
    }
    let factual: Vec<usize> = (0..distinct.len()).filter(|&i| !is_refusal(&distinct[i])).collect();

    let mut calls = Vec::new();
    // raw label per distinct answer; refusals get a label no model id can take
    let mut label: Vec<(u8, i64)> = vec![(1, 0); distinct.len()];
    if factual.len() > 1 {
        let listing = factual
            .iter()
            .enumerate()
            .map(|(n, &i)| format!("{n}. {}", distinct[i]))
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = ctx.prompts.render(
            PromptKind::Clusterer,
            &[("question", question), ("answers_numbered_list", &listing)],
        )?;
        let ids = ctx.call(
            Stage::Clusters,
            Role::Clusterer,
            &prompt,
            ctx.config.clusterer_temperature,
            0,
            &mut calls,
            |text| parse_clusters(text, factual.len()),
        )?;
        for (&i, id) in factual.iter().zip(ids) {
            label[i] = (0, id);
        }
    } else {
        for &i in &factual {
            label[i] = (0, 0);
        }
    }

    let mut renumber: HashMap<(u8, i64), usize> = HashMap::new();
    let cluster_of: Vec<usize> = distinct_of
        .iter()
        .map(|&d| {
            let next = renumber.len();
            *renumber.entry(label[d]).or_insert(next)
        })
        .collect();
    let refusal_cluster = renumber.get(&(1, 0)).copied();
    Ok(ClusterAssignment {
        cluster_count: renumber.len(),
        cluster_of,
        distinct,
        refusal_cluster,
        calls,
    })
}

/// Per-assignment empirical cluster distributions over the shared cluster space.
pub fn build_bottom_table(
    answers: &[AnswerRecord],
    clusters: &ClusterAssignment,
    premise_counts: &[usize],
    ell: usize,
) -> Result<BottomTable> {
    let game = |msg: String| PipelineError::game(Stage::Table, GameError::InvalidTable(msg));
    if answers.len() != clusters.cluster_of.len() {
        return Err(game(format!(
            "{} answers but {} cluster labels",
            answers.len(),
            clusters.cluster_of.len()
        )));
    }
    let k = clusters.cluster_count;
    let mut counts: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for (a, &c) in answers.iter().zip(&clusters.cluster_of) {
        counts.entry(a.assignment.as_slice()).or_insert_with(|| vec![0; k])[c] += 1;
    }
    let mut rows = Vec::new();
    for assignment in Assignments::new(premise_counts) {
        let row = counts
            .remove(assignment.as_slice())
            .ok_or_else(|| game(format!("assignment {assignment:?} has no answers")))?;
        let total: usize = row.iter().sum();
        if total != ell {
            return Err(game(format!(
                "assignment {assignment:?} has {total} answers, expected {ell}"
            )));
        }
        rows.push(ClusterDistribution::from_counts(&row).map_err(|e| PipelineError::game(Stage::Table, e))?);
    }
    if let Some(extra) = counts.keys().next() {
        return Err(game(format!("answers for unknown assignment {extra:?}")));
    }
    BottomTable::new(premise_counts.to_vec(), rows).map_err(|e| PipelineError::game(Stage::Table, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn premise_cleaning() {
        let five = r#"{"reasoning": "r", "premises": ["a", "b", " a ", "", "c", "d", "e"]}"#;
        assert_eq!(parse_premises(five, 3).unwrap(), ["a", "b", "c"]);
        assert_eq!(parse_premises(r#"{"premises": ["only"]}"#, 3).unwrap(), ["only"]);
        assert!(parse_premises(r#"{"premises": []}"#, 3).is_err());
        assert!(parse_premises("not json", 3).is_err());
    }

    #[test]
    fn answer_lines() {
        assert_eq!(parse_answer("Answer: Paris\nbecause").unwrap(), "Paris");
        assert_eq!(parse_answer("\n  1990 \n").unwrap(), "1990");
        assert!(parse_answer("  \n").is_err());
    }

    #[test]
    fn refusals() {
        for r in ["Unknown", "I don't know.", "N/A", "I don\u{2019}t know"] {
            assert!(is_refusal(r), "{r}");
        }
        for a in ["Paris", "None", "unknown soldier"] {
            assert!(!is_refusal(a), "{a}");
        }
    }

    #[test]
    fn cluster_json_shapes() {
        assert_eq!(parse_clusters(r#"{"clusters": {"0": 3, "1": 3, "2": 1}}"#, 3).unwrap(), [3, 3, 1]);
        assert_eq!(parse_clusters(r#"{"clusters": [[0, 2], [1]]}"#, 3).unwrap(), [0, 1, 0]);
        assert!(parse_clusters(r#"{"clusters": {"0": 0}}"#, 2).is_err());
        assert!(parse_clusters(r#"{"clusters": {"5": 0}}"#, 2).is_err());
        assert!(parse_clusters(r#"{"clusters": [[0, 1], [1]]}"#, 2).is_err());
    }

    fn records(counts: &[usize], per: &[&[usize]]) -> (Vec<AnswerRecord>, ClusterAssignment) {
        let mut answers = Vec::new();
        let mut cluster_of = Vec::new();
        for (a, clusters) in Assignments::new(counts).zip(per) {
            for (s, &c) in clusters.iter().enumerate() {
                answers.push(AnswerRecord {
                    assignment: a.clone(),
                    sample: s,
                    text: c.to_string(),
                });
                cluster_of.push(c);
            }
        }
        let assignment = ClusterAssignment {
            cluster_count: 2,
            cluster_of,
            distinct: vec![],
            refusal_cluster: None,
            calls: vec![],
        };
        (answers, assignment)
    }

    #[test]
    fn table_from_counts() {
        let (answers, clusters) = records(&[2], &[&[0, 0, 0, 1, 1], &[0, 0, 0, 0, 0]]);
        let table = build_bottom_table(&answers, &clusters, &[2], 5).unwrap();
        assert_eq!(table.row(&[0]).unwrap().probs(), &[0.6, 0.4]);
        assert_eq!(table.row(&[1]).unwrap().probs(), &[1.0, 0.0]);
    }

    #[test]
    fn table_requires_ell_answers_everywhere() {
        let (answers, clusters) = records(&[2], &[&[0, 0, 0, 1, 1], &[0, 0, 0, 0]]);
        let err = build_bottom_table(&answers, &clusters, &[2], 5).unwrap_err();
        assert!(err.to_string().contains("[1]"), "{err}");
        let (answers, clusters) = records(&[2], &[&[0, 0, 0, 1, 1]]);
        assert!(build_bottom_table(&answers, &clusters, &[2], 5).is_err());
    }
}
