#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use spanshap_pipeline::{MockBackend, MockScript, Pipeline, RunStore};

pub const BANK: &str = "The man in the suit walked into the bank. Did he go there to make a deposit?";
pub const REVISED: &str = "The customer in the suit walked into the bank. Did he go there to make a deposit?";
pub const LN2: f64 = std::f64::consts::LN_2;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn script(name: &str) -> MockScript {
    MockScript::from_path(&fixture_path(&format!("{name}.json"))).unwrap()
}

pub fn script_json(json: &str) -> MockScript {
    serde_json::from_str(json).unwrap()
}

pub fn pipeline_with(script: MockScript) -> (tempfile::TempDir, Pipeline) {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs")).unwrap();
    (dir, Pipeline::new(Arc::new(MockBackend::new(script)), store))
}

pub fn pipeline(name: &str) -> (tempfile::TempDir, Pipeline) {
    pipeline_with(script(name))
}
