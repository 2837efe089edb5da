mod common;

use common::{pipeline, BANK, LN2};
use spanshap_core::{fixtures, AttributionReport, BottomTable};
use spanshap_pipeline::stages::AnswersArtifact;
use spanshap_pipeline::{AttributionRequest, PipelineError, RunOptions, Stage};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn xor_scenario_splits_evenly() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    assert_eq!(out.spans.len(), 2);
    assert!(close(&out.report.shapley, &[LN2 / 2.0, LN2 / 2.0], 1e-12), "{:?}", out.report.shapley);
    assert!((out.report.total - LN2).abs() < 1e-12);
    let table: BottomTable = p.store().require_stage(&out.run_id, Stage::Table).unwrap();
    assert_eq!(table, fixtures::xor());
}

#[test]
fn four_row_and_dummy_tables_are_reproduced() {
    for (name, expected) in [("four_row", fixtures::four_row()), ("dummy", fixtures::dummy_span())] {
        let (_d, p) = pipeline(name);
        let out = p.run(&AttributionRequest::new(BANK)).unwrap();
        let table: BottomTable = p.store().require_stage(&out.run_id, Stage::Table).unwrap();
        assert_eq!(table, expected, "{name}");
    }
}

#[test]
fn answers_are_pooled_for_every_assignment() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    let answers: AnswersArtifact = p.store().require_stage(&out.run_id, Stage::Answers).unwrap();
    assert_eq!(answers.answers.len(), 5 * 2 * 2);
    assert_eq!(answers.calls.len(), 20);
}

#[test]
fn clear_input_short_circuits() {
    let (_d, p) = pipeline("clear");
    let out = p.run(&AttributionRequest::new("Who painted the Mona Lisa?")).unwrap();
    assert!(out.spans.is_empty());
    assert_eq!(out.report, AttributionReport::empty());
    assert_eq!(out.report.total, 0.0);
    assert_eq!(p.store().stages(&out.run_id).unwrap(), [Stage::Spans, Stage::Report]);
}

#[test]
fn too_many_spans_is_a_capacity_error() {
    let (_d, p) = pipeline("capacity");
    let err = p.run(&AttributionRequest::new("a b c d e f g h i")).unwrap_err();
    assert!(matches!(err, PipelineError::Capacity { spans: 9, limit: 8, .. }), "{err}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let mut seen = Vec::new();
    for _ in 0..5 {
        let (_d, p) = pipeline("xor");
        let out = p.run(&AttributionRequest::new(BANK)).unwrap();
        seen.push((out.run_id, serde_json::to_string(&out.report).unwrap()));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn second_run_is_served_from_the_store() {
    let (_d, p) = pipeline("xor");
    let req = AttributionRequest::new(BANK);
    let first = p.run(&req).unwrap();
    assert!(first.resumed_stages.is_empty());
    let second = p.run(&req).unwrap();
    assert_eq!(second.resumed_stages, Stage::ALL);
    assert_eq!(first.report, second.report);
}

#[test]
fn interrupted_run_resumes_at_the_first_missing_stage() {
    let req = AttributionRequest::new(BANK);
    let (_d, clean) = pipeline("xor");
    let expected = clean.run(&req).unwrap();

    let (_d2, p) = pipeline("xor");
    let err = p
        .run_with(&req, RunOptions { stop_after: Some(Stage::Premises) })
        .unwrap_err();
    assert!(matches!(err, PipelineError::Interrupted { stage: Stage::Premises, .. }));
    assert_eq!(p.store().stages(&expected.run_id).unwrap(), [Stage::Spans, Stage::Premises]);

    let resumed = p.run(&req).unwrap();
    assert_eq!(resumed.resumed_stages, [Stage::Spans, Stage::Premises]);
    assert_eq!(
        serde_json::to_string(&resumed.report).unwrap(),
        serde_json::to_string(&expected.report).unwrap()
    );
}

#[test]
fn run_id_ignores_worker_count_only() {
    let (_d, p) = pipeline("xor");
    let a = p.run(&AttributionRequest::new(BANK)).unwrap();
    let mut req = AttributionRequest::new(BANK);
    req.config.max_workers = 1;
    let b = p.run(&req).unwrap();
    assert_eq!(a.run_id, b.run_id);
    req.config.answers_per_assignment = 4;
    let c = p.run(&req).unwrap();
    assert_ne!(a.run_id, c.run_id);
}
