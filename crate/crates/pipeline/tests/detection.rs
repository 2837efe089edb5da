mod common;

use common::{fixture_path, pipeline};
use spanshap_core::Scorer;
use spanshap_pipeline::detect::{load_reference, render_table, write_outputs};
use spanshap_pipeline::{load_dataset, run_detection, DetectionOptions};

// Reference values computed with scikit-learn on the four scripted totals.
const AUROC: f64 = 0.75;
const AP: f64 = 0.833_333_333_333_333_3;
const F1: f64 = 0.8;
const THRESHOLD: f64 = 0.074_881_761_622_354_27;

fn detect(scorers: Vec<Scorer>, min_spans: usize) -> spanshap_pipeline::DetectionReport {
    let (_d, p) = pipeline("detect");
    let ds = load_dataset(&fixture_path("detect.jsonl")).unwrap();
    run_detection(&p, &ds, &DetectionOptions { scorers, min_spans, ..Default::default() })
}

#[test]
fn scripted_dataset_matches_reference_metrics() {
    let report = detect(vec![Scorer::ShapleyTotal], 0);
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let row = &report.rows[0];
    assert_eq!((row.examples, row.positives), (4, 2));
    assert!((row.auroc.unwrap() - AUROC).abs() < 1e-12);
    assert!((row.auprc.unwrap() - AP).abs() < 1e-12);
    assert!((row.f1.unwrap() - F1).abs() < 1e-12);
    assert!((row.threshold.unwrap() - THRESHOLD).abs() < 1e-9, "{:?}", row.threshold);
}

#[test]
fn two_scorers_give_two_rows() {
    let report = detect(vec![Scorer::ShapleyTotal, Scorer::LooTotal], 0);
    let names: Vec<&str> = report.rows.iter().map(|r| r.scorer.name()).collect();
    assert_eq!(names, ["shaq-total", "loo-total"]);
    assert_eq!(report.records.len(), 8);
    let table = render_table(&report);
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn min_spans_filter_keeps_multi_span_examples() {
    let report = detect(vec![Scorer::ShapleyTotal], 2);
    assert_eq!(report.filtered, 2);
    let ids: Vec<&str> = report.records.iter().map(|r| r.example_id.as_str()).collect();
    assert_eq!(ids, ["bank", "cup"]);
}

#[test]
fn unscripted_examples_are_excluded_not_imputed() {
    let (_d, p) = pipeline("xor");
    let ds = load_dataset(&fixture_path("detect.jsonl")).unwrap();
    let report = run_detection(&p, &ds, &DetectionOptions::default());
    assert_eq!(report.failures.len(), 3);
    assert!(report.failures.iter().all(|f| f.stage.as_deref() == Some("spans")));
    assert!(report.records.iter().all(|r| r.example_id == "bank"));
    assert_eq!(report.rows[0].examples, 1);
    assert_eq!(report.rows[0].auroc, None);
}

#[test]
fn outputs_round_trip_as_reference() {
    let report = detect(vec![Scorer::ShapleyTotal, Scorer::LooTotal], 0);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &report).unwrap();
    let reference = load_reference(dir.path(), Scorer::ShapleyTotal).unwrap();
    assert_eq!(reference.scores.len(), 4);
    assert!((reference.threshold.unwrap() - THRESHOLD).abs() < 1e-9);
}
