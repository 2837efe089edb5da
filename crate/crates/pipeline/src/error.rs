use std::fmt;

use serde::{Deserialize, Serialize};
use spanshap_core::GameError;
use thiserror::Error;

use crate::backend::BackendError;
use crate::prompts::PromptError;
use crate::store::StoreError;

/// Pipeline stages. [`Stage::ALL`] lists the persisted ones in execution
/// order; `Clarify` is the rewriting step of a clarification round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Spans,
    Premises,
    Answers,
    Clusters,
    Table,
    Ledger,
    Report,
    Clarify,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Spans,
        Stage::Premises,
        Stage::Answers,
        Stage::Clusters,
        Stage::Table,
        Stage::Ledger,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spans => "spans",
            Stage::Premises => "premises",
            Stage::Answers => "answers",
            Stage::Clusters => "clusters",
            Stage::Table => "table",
            Stage::Ledger => "ledger",
            Stage::Report => "report",
            Stage::Clarify => "clarify",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .chain([Stage::Clarify])
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: backend failure{what}: {source}")]
    Backend {
        stage: Stage,
        /// Which unit of work failed, e.g. " for assignment [0, 1]".
        what: String,
        #[source]
        source: BackendError,
    },

    #[error("{stage}: unusable model output: {message}")]
    Parse { stage: Stage, message: String },

    #[error("{stage}: {spans} spans exceed the limit of {limit}")]
    Capacity {
        stage: Stage,
        spans: usize,
        limit: usize,
    },

    #[error("{stage}: {source}")]
    Game {
        stage: Stage,
        #[source]
        source: GameError,
    },

    #[error(transparent)]
    Store(#[from] StoreError),

    #[error(transparent)]
    Prompt(#[from] PromptError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("run {run_id} stopped after stage {stage}")]
    Interrupted { run_id: String, stage: Stage },
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Backend { stage, .. }
            | PipelineError::Parse { stage, .. }
            | PipelineError::Capacity { stage, .. }
            | PipelineError::Game { stage, .. }
            | PipelineError::Interrupted { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub(crate) fn game(stage: Stage, source: GameError) -> Self {
        match source {
            GameError::Capacity { spans, cap } => PipelineError::Capacity {
                stage,
                spans,
                limit: cap,
            },
            source => PipelineError::Game { stage, source },
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
