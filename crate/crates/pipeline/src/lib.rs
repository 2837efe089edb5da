//! Model-driven estimation of span attributions.
//!
//! [`Pipeline::run`] locates ambiguous spans, samples premises per span,
//! samples answers under every joint clarification, clusters all answers
//! once into a shared outcome space, and hands the resulting bottom table to
//! `spanshap-core`. Every stage is persisted in a [`RunStore`] so runs can be
//! resumed, replayed and inspected.

pub mod backend;
pub mod clarify;
pub mod config;
pub mod detect;
pub mod error;
mod parse;
pub mod pipeline;
pub mod prompts;
pub mod spans;
pub mod stages;
pub mod store;

pub use backend::{ChatBackend, ChatRequest, ChatResponse, HttpBackend, HttpSettings, MockBackend, MockScript, Role};
pub use clarify::{ClarificationOutcome, ClarificationRound};
pub use config::PipelineConfig;
pub use detect::{load_dataset, run_detection, DetectionOptions, DetectionReport, LabeledExample, MetricsRow, ScoreRecord};
pub use error::{PipelineError, Result, Stage};
pub use pipeline::{recompute, run_id, AttributionRequest, Pipeline, RunManifest, RunOptions, RunOutcome};
pub use prompts::{PromptKind, PromptSet};
pub use spans::{Span, SpanKind};
pub use stages::{AnswerRecord, ClusterAssignment, SpanPremises};
pub use store::{RunArchive, RunStore, StoreError};
