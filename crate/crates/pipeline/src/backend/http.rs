use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, TokenUsage};

pub const API_KEY_ENV: &str = "SPANSHAP_API_KEY";
pub const BASE_URL_ENV: &str = "SPANSHAP_BASE_URL";

#[derive(Debug, Clone)]
pub struct HttpSettings {
    /// Up to and excluding `/chat/completions`, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpSettings {
    /// Reads the API key and, when `base_url` is `None`, the base URL from the
    /// environment.
    pub fn from_env(model: impl Into<String>, base_url: Option<String>) -> Result<Self, BackendError> {
        let base_url = base_url
            .or_else(|| std::env::var(BASE_URL_ENV).ok())
            .ok_or_else(|| {
                BackendError::Unavailable(format!("no base URL configured (set {BASE_URL_ENV})"))
            })?;
        Ok(Self {
            base_url,
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(120),
        })
    }
}

/// Provider-agnostic client for OpenAI-compatible chat endpoints.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    settings: HttpSettings,
    id: String,
}

impl HttpBackend {
    pub fn new(settings: HttpSettings) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", settings.base_url.trim_end_matches('/'));
        let id = format!("http:{}@{}", settings.model, settings.base_url);
        Ok(Self {
            client,
            endpoint,
            settings,
            id,
        })
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl ChatBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut body = json!({
            "model": self.settings.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if request.samples > 1 {
            body["n"] = json!(request.samples);
        }
        let mut call = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.settings.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let parsed: CompletionBody =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let completions: Vec<String> = parsed
            .choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect();
        if completions.is_empty() {
            return Err(BackendError::Malformed("no choices in response".into()));
        }
        let usage = parsed
            .usage
            .map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(ChatResponse { completions, usage })
    }
}
