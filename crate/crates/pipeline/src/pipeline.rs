use std::sync::Arc;

use serde::{Deserialize, Serialize};
use spanshap_core::{attribution_report, build_ledger, AttributionReport, BottomTable, CoalitionLedger};

use crate::backend::{sha256_hex, ChatBackend};
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result, Stage};
use crate::prompts::PromptSet;
use crate::spans::Span;
use crate::stages::{
    build_bottom_table, cluster_answers, generate_all_premises, localize, sample_all_answers,
    AnswersArtifact, ClusterAssignment, PremisesArtifact, SpanPremises, SpansArtifact, StageContext,
};
use crate::store::RunStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRequest {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default)]
    pub config: PipelineConfig,
}

impl AttributionRequest {
    pub fn new(input: impl Into<String>) -> Self {
        Self {
            input: input.into(),
            context: None,
            config: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Stop with [`PipelineError::Interrupted`] once this stage is stored.
    pub stop_after: Option<Stage>,
}

/// Everything that determines a run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub config: PipelineConfig,
    pub prompt_set: String,
    pub prompt_version: String,
    pub backend_id: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub input: String,
    pub spans: Vec<Span>,
    pub premises: Vec<SpanPremises>,
    pub report: AttributionReport,
    /// Stages loaded from the store instead of recomputed.
    #[serde(default)]
    pub resumed_stages: Vec<Stage>,
}

/// Content address of a run. `max_workers` does not affect results and is
/// excluded.
pub fn run_id(request: &AttributionRequest, prompt_version: &str, backend_id: &str) -> String {
    let mut config = serde_json::to_value(&request.config).expect("config serializes");
    if let Some(map) = config.as_object_mut() {
        map.remove("max_workers");
    }
    let key = serde_json::json!({
        "input": request.input,
        "context": request.context,
        "config": config,
        "prompt_version": prompt_version,
        "backend": backend_id,
    });
    sha256_hex(&key.to_string())[..32].to_string()
}

/// Runs attribution end to end over a backend, persisting each stage.
#[derive(Clone)]
pub struct Pipeline {
    backend: Arc<dyn ChatBackend>,
    store: RunStore,
}

impl Pipeline {
    pub fn new(backend: Arc<dyn ChatBackend>, store: RunStore) -> Self {
        Self { backend, store }
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    pub fn backend(&self) -> &dyn ChatBackend {
        self.backend.as_ref()
    }

    pub fn run(&self, request: &AttributionRequest) -> Result<RunOutcome> {
        self.run_with(request, RunOptions::default())
    }

    /// Runs or resumes. Stages already in the store are loaded, so an
    /// interrupted run continues at its first missing stage.
    pub fn run_with(&self, request: &AttributionRequest, options: RunOptions) -> Result<RunOutcome> {
        let config = &request.config;
        config.validate()?;
        if request.input.trim().is_empty() {
            return Err(PipelineError::Input("input is empty".into()));
        }
        let prompts = PromptSet::load(&config.prompt_set)?;
        let run_id = run_id(request, prompts.version(), self.backend.id());
        let _lock = self.store.lock(&run_id)?;
        self.store.create_run(
            &run_id,
            &RunManifest {
                run_id: run_id.clone(),
                input: request.input.clone(),
                context: request.context.clone(),
                config: config.clone(),
                prompt_set: prompts.name().to_string(),
                prompt_version: prompts.version().to_string(),
                backend_id: self.backend.id().to_string(),
                created_unix: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            },
        )?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_workers)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let ctx = StageContext {
            backend: self.backend.as_ref(),
            prompts: &prompts,
            config,
        };
        let mut run = Run {
            store: &self.store,
            run_id: &run_id,
            stop_after: options.stop_after,
            resumed: Vec::new(),
        };
        let input = request.input.as_str();

        let spans: SpansArtifact = run.stage(Stage::Spans, || localize(ctx, input, request.context.as_deref()))?;
        if spans.spans.len() > config.max_spans {
            return Err(PipelineError::Capacity {
                stage: Stage::Spans,
                spans: spans.spans.len(),
                limit: config.max_spans,
            });
        }

        let (premises, report) = if spans.spans.is_empty() {
            let report = run.stage(Stage::Report, || Ok(AttributionReport::empty()))?;
            (Vec::new(), report)
        } else {
            let premises: PremisesArtifact = run.stage(Stage::Premises, || {
                pool.install(|| generate_all_premises(ctx, input, &spans.spans))
            })?;
            let answers: AnswersArtifact = run.stage(Stage::Answers, || {
                pool.install(|| sample_all_answers(ctx, input, &premises.premises))
            })?;
            let clusters: ClusterAssignment = run.stage(Stage::Clusters, || {
                let texts: Vec<String> = answers.answers.iter().map(|a| a.text.clone()).collect();
                cluster_answers(ctx, input, &texts)
            })?;
            let table: BottomTable = run.stage(Stage::Table, || {
                build_bottom_table(
                    &answers.answers,
                    &clusters,
                    &premises.premise_counts(),
                    config.answers_per_assignment,
                )
            })?;
            let ledger: CoalitionLedger = run.stage(Stage::Ledger, || {
                build_ledger(&table).map_err(|e| PipelineError::game(Stage::Ledger, e))
            })?;
            let report = run.stage(Stage::Report, || Ok(AttributionReport::from_ledger(&ledger)))?;
            (premises.premises, report)
        };

        let resumed_stages = run.resumed;
        Ok(RunOutcome {
            run_id,
            input: request.input.clone(),
            spans: spans.spans,
            premises,
            report,
            resumed_stages,
        })
    }

    /// Reassembles the outcome of a completed run from the store.
    pub fn load(&self, run_id: &str) -> Result<RunOutcome> {
        load_outcome(&self.store, run_id)
    }
}

pub fn load_outcome(store: &RunStore, run_id: &str) -> Result<RunOutcome> {
    let manifest: RunManifest = store.manifest(run_id)?;
    let spans: SpansArtifact = store.require_stage(run_id, Stage::Spans)?;
    let premises = store
        .get_stage::<PremisesArtifact>(run_id, Stage::Premises)?
        .map(|p| p.premises)
        .unwrap_or_default();
    let report = store.require_stage(run_id, Stage::Report)?;
    Ok(RunOutcome {
        run_id: run_id.to_string(),
        input: manifest.input,
        spans: spans.spans,
        premises,
        report,
        resumed_stages: Stage::ALL.to_vec(),
    })
}

/// Recomputes a stored run's report from its bottom table alone.
pub fn recompute(store: &RunStore, run_id: &str) -> Result<AttributionReport> {
    let spans: SpansArtifact = store.require_stage(run_id, Stage::Spans)?;
    if spans.spans.is_empty() {
        return Ok(AttributionReport::empty());
    }
    let table: BottomTable = store.require_stage(run_id, Stage::Table)?;
    attribution_report(&table).map_err(|e| PipelineError::game(Stage::Report, e))
}

struct Run<'a> {
    store: &'a RunStore,
    run_id: &'a str,
    stop_after: Option<Stage>,
    resumed: Vec<Stage>,
}

impl Run<'_> {
    fn stage<T, F>(&mut self, stage: Stage, compute: F) -> Result<T>
    where
        T: Serialize + serde::de::DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        let value = match self.store.get_stage::<T>(self.run_id, stage)? {
            Some(v) => {
                tracing::debug!(run_id = self.run_id, %stage, "resumed from store");
                self.resumed.push(stage);
                v
            }
            None => {
                let v = compute()?;
                self.store.put_stage(self.run_id, stage, &v)?;
                v
            }
        };
        if self.stop_after == Some(stage) {
            return Err(PipelineError::Interrupted {
                run_id: self.run_id.to_string(),
                stage,
            });
        }
        Ok(value)
    }
}
