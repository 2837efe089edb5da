//! Effective configuration: flags, then environment, then the TOML file,
//! then built-in defaults. Clap merges the first two.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use spanshap_pipeline::{ChatBackend, HttpBackend, HttpSettings, MockBackend, MockScript, PipelineConfig, RunStore};

use crate::error::ServiceError;

pub const DEFAULT_STORE: &str = "runs";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    #[default]
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bind: Option<String>,
}

/// Layout of the TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub store: Option<PathBuf>,
    pub backend: BackendSettings,
    pub pipeline: PipelineConfig,
    pub service: ServiceSettings,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::bad_request(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ServiceError::bad_request(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub store: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub script: Option<PathBuf>,
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub premises_per_span: Option<usize>,
    pub answers_per_assignment: Option<usize>,
    pub answerer_temperature: Option<f64>,
    pub generator_temperature: Option<f64>,
    pub max_workers: Option<usize>,
    pub max_retries: Option<usize>,
    pub max_spans: Option<usize>,
    pub prompt_set: Option<String>,
    pub bind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub store: PathBuf,
    pub backend: BackendSettings,
    pub pipeline: PipelineConfig,
    pub bind: String,
}

impl Settings {
    pub fn resolve(file: FileConfig, o: Overrides) -> Result<Self, ServiceError> {
        let mut pipeline = file.pipeline;
        let p = &mut pipeline;
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = o.$field { p.$field = v; })*};
        }
        set!(
            premises_per_span,
            answers_per_assignment,
            answerer_temperature,
            generator_temperature,
            max_workers,
            max_retries,
            max_spans,
            prompt_set
        );
        pipeline.validate().map_err(|e| ServiceError::bad_request(e.to_string()))?;
        let backend = BackendSettings {
            kind: o.backend.unwrap_or(file.backend.kind),
            script: o.script.or(file.backend.script),
            model: o.model.or(file.backend.model),
            base_url: o.base_url.or(file.backend.base_url),
        };
        Ok(Self {
            store: o.store.or(file.store).unwrap_or_else(|| DEFAULT_STORE.into()),
            backend,
            pipeline,
            bind: o.bind.or(file.service.bind).unwrap_or_else(|| DEFAULT_BIND.into()),
        })
    }

    pub fn open_store(&self) -> Result<RunStore, ServiceError> {
        Ok(RunStore::open(&self.store)?)
    }

    pub fn build_backend(&self) -> Result<Arc<dyn ChatBackend>, ServiceError> {
        let b = &self.backend;
        match b.kind {
            BackendKind::Mock => {
                let path = b
                    .script
                    .as_deref()
                    .ok_or_else(|| ServiceError::bad_request("the mock backend needs --script"))?;
                let script = MockScript::from_path(&script_path(path))
                    .map_err(|e| ServiceError::bad_request(format!("mock script: {e}")))?;
                Ok(Arc::new(MockBackend::new(script)))
            }
            BackendKind::Http => {
                let model = b
                    .model
                    .clone()
                    .ok_or_else(|| ServiceError::bad_request("the http backend needs --model"))?;
                let settings = HttpSettings::from_env(model, b.base_url.clone())
                    .map_err(|e| ServiceError::bad_request(e.to_string()))?;
                let backend = HttpBackend::new(settings).map_err(|e| ServiceError::internal(e.to_string()))?;
                Ok(Arc::new(backend))
            }
        }
    }
}

/// `fixtures/xor` names `fixtures/xor.json` when the former does not exist.
pub fn script_path(path: &Path) -> PathBuf {
    if path.exists() || path.extension().is_some() {
        path.to_path_buf()
    } else {
        path.with_extension("json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_fill_gaps_and_overrides_win() {
        let file: FileConfig = toml::from_str(
            r#"
            store = "elsewhere"
            [backend]
            kind = "mock"
            script = "a.json"
            [pipeline]
            premises_per_span = 2
            answers_per_assignment = 7
            "#,
        )
        .unwrap();
        let o = Overrides {
            answers_per_assignment: Some(4),
            ..Default::default()
        };
        let s = Settings::resolve(file, o).unwrap();
        assert_eq!(s.store, PathBuf::from("elsewhere"));
        assert_eq!(s.backend.kind, BackendKind::Mock);
        assert_eq!(s.pipeline.premises_per_span, 2);
        assert_eq!(s.pipeline.answers_per_assignment, 4);
        assert_eq!(s.pipeline.generator_temperature, 0.9);
        assert_eq!(s.bind, DEFAULT_BIND);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[pipeline]\nell = 5").is_err());
    }

    #[test]
    fn invalid_values_are_bad_requests() {
        let o = Overrides {
            premises_per_span: Some(0),
            ..Default::default()
        };
        let e = Settings::resolve(FileConfig::default(), o).unwrap_err();
        assert_eq!(e.code, crate::error::ErrorCode::BadRequest);
    }

    #[test]
    fn script_extension_is_optional() {
        assert_eq!(script_path(Path::new("no/such/xor")), PathBuf::from("no/such/xor.json"));
        assert_eq!(script_path(Path::new("no/such/xor.json")), PathBuf::from("no/such/xor.json"));
    }
}
