#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;

use spanshap_cli::service::{router, AppState};
use spanshap_pipeline::{MockBackend, MockScript, Pipeline, PipelineConfig, RunStore};

pub const BANK: &str = "The man in the suit walked into the bank. Did he go there to make a deposit?";
pub const REVISED: &str = "The customer in the suit walked into the bank. Did he go there to make a deposit?";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// The binary with a clean environment, run inside `dir`.
pub fn spanshap(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spanshap"));
    cmd.current_dir(dir).env_clear().stdin(Stdio::null());
    if let Ok(path) = std::env::var("PATH") {
        cmd.env("PATH", path);
    }
    cmd
}

pub fn mock(dir: &Path, script: &str) -> Command {
    let mut cmd = spanshap(dir);
    cmd.arg("--backend").arg("mock").arg("--script").arg(fixture(script));
    cmd
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A service on an ephemeral port, alive until the handle drops.
pub struct Server {
    pub base: String,
    _runtime: tokio::runtime::Runtime,
}

impl Server {
    pub fn start(script: &str, store: &Path) -> Self {
        let script = MockScript::from_path(&fixture(&format!("{script}.json"))).unwrap();
        let pipeline = Pipeline::new(Arc::new(MockBackend::new(script)), RunStore::open(store).unwrap());
        let state = AppState {
            pipeline,
            config: PipelineConfig::default(),
        };
        let runtime = tokio::runtime::Runtime::new().unwrap();
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        runtime.spawn(async move { axum::serve(listener, router(state)).await });
        Self { base, _runtime: runtime }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}
