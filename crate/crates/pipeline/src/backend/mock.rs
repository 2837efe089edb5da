use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{sha256_hex, BackendError, ChatBackend, ChatRequest, ChatResponse, Role, TokenUsage};

/// One scripted completion, or a simulated transport failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Fail { fail: String },
}

/// Matches a request and supplies its completions.
///
/// All present conditions must hold. Completion `i` of a request is
/// `responses[(sample_index + attempt + i) % responses.len()]`, so repeated
/// samples and retries walk through the list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    /// Substrings that must all occur in the prompt.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    /// Suffix of the prompt, ignoring trailing whitespace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ends_with: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    pub responses: Vec<MockReply>,
}

impl MockRule {
    fn matches(&self, request: &ChatRequest, digest: &str) -> bool {
        self.role.is_none_or(|r| r == request.role)
            && self.prompt_sha256.as_deref().is_none_or(|h| h == digest)
            && self.contains.iter().all(|c| request.prompt.contains(c.as_str()))
            && self
                .ends_with
                .as_deref()
                .is_none_or(|e| request.prompt.trim_end().ends_with(e))
    }
}

/// Ordered rules; the first match wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub rules: Vec<MockRule>,
}

impl MockScript {
    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Malformed(format!("{}: {e}", path.display())))
    }
}

/// Deterministic backend replaying a [`MockScript`].
#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    id: String,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        let canonical = serde_json::to_string(&script).expect("script serializes");
        let id = format!("mock:{}", &sha256_hex(&canonical)[..16]);
        Self {
            script,
            id,
            calls: AtomicUsize::new(0),
        }
    }

    /// Completion calls served so far, including scripted failures.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let digest = sha256_hex(&request.prompt);
        let rule = self
            .script
            .rules
            .iter()
            .find(|r| r.matches(request, &digest))
            .filter(|r| !r.responses.is_empty())
            .ok_or_else(|| BackendError::Unscripted {
                role: request.role,
                prompt_sha256: digest.clone(),
            })?;
        let start = (request.sample_index + request.attempt) as usize;
        let mut completions = Vec::with_capacity(request.samples as usize);
        for i in 0..request.samples.max(1) as usize {
            match &rule.responses[(start + i) % rule.responses.len()] {
                MockReply::Text(t) => completions.push(t.clone()),
                MockReply::Fail { fail } => return Err(BackendError::Unavailable(fail.clone())),
            }
        }
        Ok(ChatResponse {
            completions,
            usage: TokenUsage::default(),
        })
    }
}
