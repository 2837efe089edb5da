//! On-disk run store.
//!
//! Layout, one directory per run:
//!
//! ```text
//! <root>/<run_id>/manifest.json
//! <root>/<run_id>/<stage>.json        spans, premises, answers, clusters, table, ledger, report
//! <root>/<run_id>/clarifications.jsonl
//! ```
//!
//! Every `.json` file is an envelope `{schema_version, run_id, stage,
//! written_unix, artifact}`. Stage files are written once; a second write is a
//! conflict. Files without `schema_version` are read as version 0 (a bare
//! artifact).

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::error::Stage;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest";
const CLARIFICATIONS: &str = "clarifications.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("run {run_id}: stage {stage} is already finalized")]
    Conflict { run_id: String, stage: String },
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("run {run_id}: no {stage} artifact")]
    MissingStage { run_id: String, stage: String },
    #[error("{path}: unsupported schema_version {version}")]
    Schema { path: String, version: u64 },
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        StoreError::Format {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub run_id: String,
    pub stage: String,
    pub written_unix: u64,
    pub artifact: T,
}

/// Where a stored artifact lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRef {
    pub run_id: String,
    pub stage: String,
    pub path: PathBuf,
}

/// A whole run as a single document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArchive {
    pub schema_version: u32,
    pub run_id: String,
    pub manifest: Value,
    /// Stage name to artifact, for the stages present.
    pub stages: BTreeMap<String, Value>,
    pub clarifications: Vec<Value>,
}

/// Serializes writers per run directory within this process.
pub struct RunLock {
    key: PathBuf,
}

fn held_locks() -> &'static (Mutex<HashSet<PathBuf>>, Condvar) {
    static LOCKS: OnceLock<(Mutex<HashSet<PathBuf>>, Condvar)> = OnceLock::new();
    LOCKS.get_or_init(Default::default)
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let (set, cv) = held_locks();
        set.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.key);
        cv.notify_all();
    }
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Run ids are generated hex digests; anything else cannot name a run.
fn valid_run_id(run_id: &str) -> bool {
    !run_id.is_empty()
        && run_id.len() <= 128
        && run_id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| StoreError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn run_dir(&self, run_id: &str) -> Result<PathBuf, StoreError> {
        if !valid_run_id(run_id) {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        Ok(self.root.join(run_id))
    }

    fn stage_path(&self, run_id: &str, stage: &str) -> Result<PathBuf, StoreError> {
        Ok(self.run_dir(run_id)?.join(format!("{stage}.json")))
    }

    pub fn exists(&self, run_id: &str) -> bool {
        self.run_dir(run_id)
            .map(|d| d.join(format!("{MANIFEST}.json")).is_file())
            .unwrap_or(false)
    }

    /// Blocks until no other writer in this process holds `run_id`.
    pub fn lock(&self, run_id: &str) -> Result<RunLock, StoreError> {
        let key = self.run_dir(run_id)?;
        let (set, cv) = held_locks();
        let mut held = set.lock().unwrap_or_else(|e| e.into_inner());
        while held.contains(&key) {
            held = cv.wait(held).unwrap_or_else(|e| e.into_inner());
        }
        held.insert(key.clone());
        Ok(RunLock { key })
    }

    /// Writes the manifest if the run is new. Returns whether it was created.
    pub fn create_run<T: Serialize>(&self, run_id: &str, manifest: &T) -> Result<bool, StoreError> {
        match self.put(run_id, MANIFEST, manifest) {
            Ok(_) => Ok(true),
            Err(StoreError::Conflict { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub fn put_stage<T: Serialize>(
        &self,
        run_id: &str,
        stage: Stage,
        artifact: &T,
    ) -> Result<StageRef, StoreError> {
        if !self.exists(run_id) {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        self.put(run_id, stage.name(), artifact)
    }

    fn put<T: Serialize>(&self, run_id: &str, stage: &str, artifact: &T) -> Result<StageRef, StoreError> {
        let dir = self.run_dir(run_id)?;
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let path = dir.join(format!("{stage}.json"));
        if path.exists() {
            return Err(StoreError::Conflict {
                run_id: run_id.to_string(),
                stage: stage.to_string(),
            });
        }
        let envelope = Envelope {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.to_string(),
            stage: stage.to_string(),
            written_unix: now_unix(),
            artifact,
        };
        let mut bytes = serde_json::to_vec_pretty(&envelope).map_err(|e| StoreError::format(&path, e))?;
        bytes.push(b'\n');

        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| StoreError::io(&dir, e))?;
        tmp.write_all(&bytes).map_err(|e| StoreError::io(&path, e))?;
        tmp.as_file().sync_all().map_err(|e| StoreError::io(&path, e))?;
        tmp.persist_noclobber(&path).map_err(|e| {
            if e.error.kind() == io::ErrorKind::AlreadyExists {
                StoreError::Conflict {
                    run_id: run_id.to_string(),
                    stage: stage.to_string(),
                }
            } else {
                StoreError::io(&path, e.error)
            }
        })?;
        if let Ok(d) = fs::File::open(&dir) {
            let _ = d.sync_all();
        }
        Ok(StageRef {
            run_id: run_id.to_string(),
            stage: stage.to_string(),
            path,
        })
    }

    fn read_value(&self, run_id: &str, stage: &str) -> Result<Option<Value>, StoreError> {
        let path = self.stage_path(run_id, stage)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(StoreError::io(&path, e)),
        };
        let value: Value = serde_json::from_str(&text).map_err(|e| StoreError::format(&path, e))?;
        migrate(&path, value).map(Some)
    }

    /// Reads a stage artifact, `None` if it was never written.
    pub fn get_stage<T: DeserializeOwned>(&self, run_id: &str, stage: Stage) -> Result<Option<T>, StoreError> {
        self.get(run_id, stage.name())
    }

    pub fn get<T: DeserializeOwned>(&self, run_id: &str, stage: &str) -> Result<Option<T>, StoreError> {
        let path = self.stage_path(run_id, stage)?;
        match self.read_value(run_id, stage)? {
            None => Ok(None),
            Some(v) => serde_json::from_value(v)
                .map(Some)
                .map_err(|e| StoreError::format(&path, e)),
        }
    }

    pub fn require_stage<T: DeserializeOwned>(&self, run_id: &str, stage: Stage) -> Result<T, StoreError> {
        if !self.exists(run_id) {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        self.get_stage(run_id, stage)?.ok_or_else(|| StoreError::MissingStage {
            run_id: run_id.to_string(),
            stage: stage.name().to_string(),
        })
    }

    pub fn manifest<T: DeserializeOwned>(&self, run_id: &str) -> Result<T, StoreError> {
        self.get(run_id, MANIFEST)?
            .ok_or_else(|| StoreError::UnknownRun(run_id.to_string()))
    }

    /// Stages with a stored artifact, in pipeline order.
    pub fn stages(&self, run_id: &str) -> Result<Vec<Stage>, StoreError> {
        let dir = self.run_dir(run_id)?;
        Ok(Stage::ALL
            .into_iter()
            .filter(|s| dir.join(format!("{}.json", s.name())).is_file())
            .collect())
    }

    pub fn append_clarification<T: Serialize>(&self, run_id: &str, record: &T) -> Result<(), StoreError> {
        if !self.exists(run_id) {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        let path = self.run_dir(run_id)?.join(CLARIFICATIONS);
        let mut line = serde_json::to_vec(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "written_unix": now_unix(),
            "record": record,
        }))
        .map_err(|e| StoreError::format(&path, e))?;
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::io(&path, e))?;
        file.write_all(&line).map_err(|e| StoreError::io(&path, e))?;
        file.sync_all().map_err(|e| StoreError::io(&path, e))
    }

    pub fn clarifications(&self, run_id: &str) -> Result<Vec<Value>, StoreError> {
        let path = self.run_dir(run_id)?.join(CLARIFICATIONS);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(StoreError::io(&path, e)),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let v: Value = serde_json::from_str(l).map_err(|e| StoreError::format(&path, e))?;
                Ok(match v {
                    Value::Object(mut m) if m.contains_key("schema_version") => {
                        m.remove("record").unwrap_or(Value::Null)
                    }
                    other => other,
                })
            })
            .collect()
    }

    pub fn export(&self, run_id: &str) -> Result<RunArchive, StoreError> {
        let manifest = self.manifest::<Value>(run_id)?;
        let mut stages = BTreeMap::new();
        for stage in self.stages(run_id)? {
            if let Some(v) = self.read_value(run_id, stage.name())? {
                stages.insert(stage.name().to_string(), v);
            }
        }
        Ok(RunArchive {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.to_string(),
            manifest,
            stages,
            clarifications: self.clarifications(run_id)?,
        })
    }
}

/// Returns the bare artifact of a stored document of any known version.
fn migrate(path: &Path, value: Value) -> Result<Value, StoreError> {
    match value {
        Value::Object(mut map) if map.contains_key("schema_version") => {
            let version = map["schema_version"].as_u64().unwrap_or(u64::MAX);
            if version != u64::from(SCHEMA_VERSION) {
                return Err(StoreError::Schema {
                    path: path.display().to_string(),
                    version,
                });
            }
            map.remove("artifact")
                .ok_or_else(|| StoreError::format(path, "envelope without artifact"))
        }
        // version 0: the artifact itself
        other => Ok(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, RunStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path().join("runs")).unwrap();
        (dir, store)
    }

    #[test]
    fn round_trip_and_conflict() {
        let (_d, s) = store();
        assert!(s.create_run("r1", &serde_json::json!({"input": "q"})).unwrap());
        assert!(!s.create_run("r1", &serde_json::json!({"input": "q"})).unwrap());
        let spans = vec!["a".to_string(), "b".to_string()];
        s.put_stage("r1", Stage::Spans, &spans).unwrap();
        assert_eq!(s.get_stage::<Vec<String>>("r1", Stage::Spans).unwrap(), Some(spans.clone()));
        assert!(matches!(
            s.put_stage("r1", Stage::Spans, &spans),
            Err(StoreError::Conflict { .. })
        ));
        assert_eq!(s.get_stage::<Vec<String>>("r1", Stage::Premises).unwrap(), None);
        assert_eq!(s.stages("r1").unwrap(), vec![Stage::Spans]);
    }

    #[test]
    fn unknown_and_hostile_run_ids() {
        let (_d, s) = store();
        assert!(matches!(s.put_stage("nope", Stage::Spans, &1), Err(StoreError::UnknownRun(_))));
        assert!(matches!(s.export("../etc"), Err(StoreError::UnknownRun(_))));
        assert!(matches!(s.export("missing"), Err(StoreError::UnknownRun(_))));
    }

    #[test]
    fn version_zero_files_are_read_as_bare_artifacts() {
        let (_d, s) = store();
        s.create_run("r", &1).unwrap();
        fs::write(s.root().join("r").join("spans.json"), "[1, 2, 3]").unwrap();
        assert_eq!(s.get_stage::<Vec<u8>>("r", Stage::Spans).unwrap(), Some(vec![1, 2, 3]));
        fs::write(
            s.root().join("r").join("premises.json"),
            r#"{"schema_version": 99, "artifact": 1}"#,
        )
        .unwrap();
        assert!(matches!(s.get_stage::<u8>("r", Stage::Premises), Err(StoreError::Schema { .. })));
    }

    #[test]
    fn clarifications_and_export() {
        let (_d, s) = store();
        s.create_run("r", &serde_json::json!({"input": "q"})).unwrap();
        s.put_stage("r", Stage::Report, &serde_json::json!({"total": 0.0})).unwrap();
        s.append_clarification("r", &serde_json::json!({"revised": "q2"})).unwrap();
        s.append_clarification("r", &serde_json::json!({"revised": "q3"})).unwrap();
        let archive = s.export("r").unwrap();
        assert_eq!(archive.manifest["input"], "q");
        assert_eq!(archive.stages["report"]["total"], 0.0);
        assert_eq!(archive.clarifications.len(), 2);
        assert_eq!(archive.clarifications[1]["revised"], "q3");
    }

    #[test]
    fn lock_excludes_concurrent_writers() {
        let (_d, s) = store();
        let guard = s.lock("r").unwrap();
        let s2 = s.clone();
        let (tx, rx) = std::sync::mpsc::channel();
        let t = std::thread::spawn(move || {
            let _g = s2.lock("r").unwrap();
            tx.send(()).unwrap();
        });
        assert!(rx.recv_timeout(std::time::Duration::from_millis(100)).is_err());
        drop(guard);
        rx.recv_timeout(std::time::Duration::from_secs(5)).unwrap();
        t.join().unwrap();
    }
}
