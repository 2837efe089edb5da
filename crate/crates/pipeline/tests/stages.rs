mod common;

use common::script_json;
use spanshap_pipeline::stages::{cluster_answers, generate_premises, localize, sample_answers, StageContext};
use spanshap_pipeline::{MockBackend, PipelineConfig, PipelineError, PromptSet, SpanKind, Stage};

fn with_ctx<R>(json: &str, config: PipelineConfig, f: impl FnOnce(StageContext<'_>, &MockBackend) -> R) -> R {
    let backend = MockBackend::new(script_json(json));
    let prompts = PromptSet::load("qa").unwrap();
    let ctx = StageContext {
        backend: &backend,
        prompts: &prompts,
        config: &config,
    };
    f(ctx, &backend)
}

#[test]
fn clear_question_has_no_spans() {
    let json = r#"{"rules": [{"role": "localizer", "ends_with": "Input question: Who invented the theory of relativity?",
        "responses": ["{\"tagged_sentence\": \"Who invented the theory of relativity?\", \"spans\": []}"]}]}"#;
    let spans = with_ctx(json, PipelineConfig::default(), |ctx, _| {
        localize(ctx, "Who invented the theory of relativity?", None).unwrap()
    });
    assert!(spans.spans.is_empty());
}

#[test]
fn world_cup_has_a_span_and_an_insertion_point() {
    let input = "who won the world cup";
    let json = r#"{"rules": [{"role": "localizer", "ends_with": "Input question: who won the world cup",
        "responses": ["{\"tagged_sentence\": \"who won the <ambig id=\\\"1\\\">world cup</ambig><ambig id=\\\"2\\\"></ambig>\", \"spans\": [{\"id\": 1, \"reason\": \"no sport\"}, {\"id\": 2, \"reason\": \"no year\"}]}"]}]}"#;
    let spans = with_ctx(json, PipelineConfig::default(), |ctx, _| localize(ctx, input, None).unwrap()).spans;
    assert_eq!(spans.len(), 2);
    assert_eq!((spans[0].start, spans[0].end), (12, 21));
    assert_eq!(&input[spans[0].start..spans[0].end], "world cup");
    assert_eq!(spans[0].reason, "no sport");
    assert_eq!(spans[1].kind, SpanKind::InsertionPoint);
    assert_eq!((spans[1].start, spans[1].end), (21, 21));
    assert_eq!(spans[1].display_text(), "[insertion point]");
}

#[test]
fn rewritten_sentence_is_rejected_after_retries() {
    let json = r#"{"rules": [{"role": "localizer", "responses": ["who won the <ambig id=\"1\">FIFA</ambig> world cup"]}]}"#;
    let config = PipelineConfig { max_retries: 2, ..Default::default() };
    let (err, calls) = with_ctx(json, config, |ctx, b| (localize(ctx, "who won the world cup", None).unwrap_err(), b.calls()));
    assert!(matches!(err, PipelineError::Parse { stage: Stage::Spans, .. }), "{err}");
    assert_eq!(calls, 3);
}

#[test]
fn localizer_recovers_on_retry() {
    let json = r#"{"rules": [{"role": "localizer", "responses": [{"fail": "timeout"}, "who won the <ambig id=\"1\">world cup</ambig>"]}]}"#;
    let spans = with_ctx(json, PipelineConfig::default(), |ctx, _| localize(ctx, "who won the world cup", None).unwrap());
    assert_eq!(spans.spans.len(), 1);
    assert_eq!(spans.calls.len(), 2);
    assert!(spans.calls[0].error.is_some());
}

#[test]
fn backend_failures_exhaust_the_retry_budget() {
    let json = r#"{"rules": [{"responses": [{"fail": "down"}]}]}"#;
    let config = PipelineConfig { max_retries: 3, ..Default::default() };
    let (err, calls) = with_ctx(json, config, |ctx, b| (localize(ctx, "who won", None).unwrap_err(), b.calls()));
    assert!(matches!(err, PipelineError::Backend { stage: Stage::Spans, .. }), "{err}");
    assert_eq!(calls, 4);
}

fn world_cup_span() -> spanshap_pipeline::Span {
    let json = r#"{"rules": [{"role": "localizer", "responses": ["who won the <ambig id=\"1\">world cup</ambig>"]}]}"#;
    with_ctx(json, PipelineConfig::default(), |ctx, _| localize(ctx, "who won the world cup", None).unwrap())
        .spans
        .remove(0)
}

fn premises_reply(premises: &[&str]) -> String {
    let body = serde_json::json!({"reasoning": "r", "premises": premises}).to_string();
    serde_json::json!({"rules": [{"role": "generator", "responses": [body]}]}).to_string()
}

#[test]
fn premises_pass_through() {
    let span = world_cup_span();
    let json = premises_reply(&["FIFA World Cup.", "Rugby World Cup.", "Cricket World Cup."]);
    let p = with_ctx(&json, PipelineConfig::default(), |ctx, _| {
        generate_premises(ctx, "who won the world cup", &span, &mut Vec::new()).unwrap()
    });
    assert_eq!(p.span_id, 1);
    assert_eq!(p.statements, ["FIFA World Cup.", "Rugby World Cup.", "Cricket World Cup."]);
}

#[test]
fn single_premise_is_accepted() {
    let span = world_cup_span();
    let p = with_ctx(&premises_reply(&["FIFA World Cup."]), PipelineConfig::default(), |ctx, _| {
        generate_premises(ctx, "who won the world cup", &span, &mut Vec::new()).unwrap()
    });
    assert_eq!(p.statements.len(), 1);
}

#[test]
fn excess_premises_keep_the_first_three() {
    let span = world_cup_span();
    let json = premises_reply(&["a.", "b.", "c.", "d.", "e."]);
    let p = with_ctx(&json, PipelineConfig::default(), |ctx, _| {
        generate_premises(ctx, "who won the world cup", &span, &mut Vec::new()).unwrap()
    });
    assert_eq!(p.statements, ["a.", "b.", "c."]);
}

#[test]
fn empty_premises_name_the_span() {
    let span = world_cup_span();
    let err = with_ctx(&premises_reply(&[]), PipelineConfig::default(), |ctx, _| {
        generate_premises(ctx, "who won the world cup", &span, &mut Vec::new()).unwrap_err()
    });
    assert!(matches!(err, PipelineError::Parse { stage: Stage::Premises, .. }));
    assert!(err.to_string().contains("span 1"), "{err}");
}

#[test]
fn answers_are_single_calls_per_sample() {
    let json = r#"{"rules": [{"role": "answerer", "responses": ["Answer: Paris"]}]}"#;
    let (answers, calls, served) = with_ctx(json, PipelineConfig::default(), |ctx, b| {
        let (a, c) = sample_answers(ctx, "capital of France?", &[], &[]).unwrap();
        (a, c, b.calls())
    });
    assert_eq!(answers.len(), 5);
    assert!(answers.iter().all(|a| a.text == "Paris"));
    assert_eq!(served, 5);
    let mut samples: Vec<u32> = calls.iter().map(|c| c.sample_index).collect();
    samples.sort();
    assert_eq!(samples, [0, 1, 2, 3, 4]);
    assert!(calls[0].prompt.contains("Assumptions:\nNone."));
}

fn clusters_for(answers: &[&str], reply: &str) -> spanshap_pipeline::ClusterAssignment {
    let json = serde_json::json!({"rules": [{"role": "clusterer", "responses": [reply]}]}).to_string();
    let answers: Vec<String> = answers.iter().map(|s| s.to_string()).collect();
    with_ctx(&json, PipelineConfig::default(), |ctx, _| cluster_answers(ctx, "q", &answers).unwrap())
}

#[test]
fn surface_variants_share_a_cluster() {
    let c = clusters_for(&["Paris", "paris, france"], r#"{"clusters": {"0": 0, "1": 0}}"#);
    assert_eq!(c.cluster_of, [0, 0]);
    assert_eq!(c.cluster_count, 1);
}

#[test]
fn distinct_years_split() {
    let c = clusters_for(&["1990", "2014"], r#"{"clusters": {"0": 0, "1": 1}}"#);
    assert_eq!(c.cluster_of, [0, 1]);
    assert_eq!(c.cluster_count, 2);
}

#[test]
fn refusals_form_their_own_cluster() {
    let c = clusters_for(&["unknown", "Paris", "I don't know"], "unused");
    assert_eq!(c.cluster_count, 2);
    assert_eq!(c.cluster_of[0], c.cluster_of[2]);
    assert_ne!(c.cluster_of[0], c.cluster_of[1]);
    assert_eq!(c.refusal_cluster, Some(c.cluster_of[0]));
}

#[test]
fn incomplete_cluster_maps_are_retried_then_fail() {
    let json = r#"{"rules": [{"role": "clusterer", "responses": ["{\"clusters\": {\"0\": 0}}"]}]}"#;
    let answers = vec!["a".to_string(), "b".to_string()];
    let err = with_ctx(json, PipelineConfig::default(), |ctx, _| cluster_answers(ctx, "q", &answers).unwrap_err());
    assert!(matches!(err, PipelineError::Parse { stage: Stage::Clusters, .. }), "{err}");
}
