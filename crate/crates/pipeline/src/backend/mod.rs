//! Chat-completion backends.
//!
//! The pipeline only needs "prompt in, completions out". [`HttpBackend`]
//! talks to any OpenAI-compatible `/chat/completions` endpoint and
//! [`MockBackend`] replays a deterministic script.

mod http;
mod mock;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpSettings, API_KEY_ENV, BASE_URL_ENV};
pub use mock::{MockBackend, MockReply, MockRule, MockScript};

/// Which pipeline role issued a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Localizer,
    Generator,
    Answerer,
    Clusterer,
    Clarifier,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Localizer => "localizer",
            Role::Generator => "generator",
            Role::Answerer => "answerer",
            Role::Clusterer => "clusterer",
            Role::Clarifier => "clarifier",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: Role,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Completions requested in this call.
    pub samples: u32,
    /// Position of the first requested sample among repeated identical
    /// prompts. Real endpoints ignore it; scripted backends key on it.
    pub sample_index: u32,
    /// Zero for the first try, incremented on every retry.
    pub attempt: u32,
}

impl ChatRequest {
    pub fn new(role: Role, prompt: impl Into<String>, temperature: f64) -> Self {
        Self {
            role,
            prompt: prompt.into(),
            temperature,
            max_tokens: 1024,
            samples: 1,
            sample_index: 0,
            attempt: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub completions: Vec<String>,
    #[serde(default)]
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("script has no response for {role} prompt {prompt_sha256}")]
    Unscripted { role: Role, prompt_sha256: String },
}

pub trait ChatBackend: Send + Sync {
    /// Stable identity folded into run ids (adapter kind plus model or script digest).
    fn id(&self) -> &str;

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

pub(crate) fn sha256_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}
