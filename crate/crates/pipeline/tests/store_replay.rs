mod common;

use std::fs;

use common::{pipeline, BANK, LN2};
use spanshap_core::AttributionReport;
use spanshap_pipeline::{recompute, AttributionRequest, Stage, StoreError};

#[test]
fn recompute_matches_stored_report_exactly() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    let again = recompute(p.store(), &out.run_id).unwrap();
    assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&out.report).unwrap());
    assert_eq!(again.shapley, [LN2 / 2.0, LN2 / 2.0]);
}

#[test]
fn tampered_table_is_rejected() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    let path = p.store().root().join(&out.run_id).join("table.json");
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    doc["artifact"]["distributions"].as_array_mut().unwrap().pop();
    fs::write(&path, doc.to_string()).unwrap();
    let err = recompute(p.store(), &out.run_id).unwrap_err();
    assert!(err.to_string().contains("joint assignments"), "{err}");
}

#[test]
fn unversioned_records_are_migrated() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    let dir = p.store().root().join(&out.run_id);
    for stage in ["spans", "table", "report"] {
        let path = dir.join(format!("{stage}.json"));
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        fs::write(&path, serde_json::to_string_pretty(&doc["artifact"]).unwrap()).unwrap();
    }
    let again = recompute(p.store(), &out.run_id).unwrap();
    assert_eq!(again, out.report);
    let stored: AttributionReport = p.store().require_stage(&out.run_id, Stage::Report).unwrap();
    assert_eq!(stored, out.report);
}

#[test]
fn unknown_schema_versions_are_refused() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    let path = p.store().root().join(&out.run_id).join("report.json");
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    doc["schema_version"] = 99.into();
    fs::write(&path, doc.to_string()).unwrap();
    let err = p.store().get_stage::<AttributionReport>(&out.run_id, Stage::Report).unwrap_err();
    assert!(matches!(err, StoreError::Schema { version: 99, .. }));
}

#[test]
fn stages_are_immutable() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    let err = p.store().put_stage(&out.run_id, Stage::Report, &AttributionReport::empty()).unwrap_err();
    assert!(matches!(err, StoreError::Conflict { .. }));
}

#[test]
fn export_bundles_every_stage() {
    let (_d, p) = pipeline("xor");
    let out = p.run(&AttributionRequest::new(BANK)).unwrap();
    let archive = p.store().export(&out.run_id).unwrap();
    let names: Vec<&str> = archive.stages.keys().map(String::as_str).collect();
    for stage in Stage::ALL {
        assert!(names.contains(&stage.name()), "{names:?}");
    }
    let text = serde_json::to_string(&archive).unwrap();
    let back: spanshap_pipeline::RunArchive = serde_json::from_str(&text).unwrap();
    assert_eq!(back, archive);
}
