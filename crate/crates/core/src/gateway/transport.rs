//! Provider-agnostic completion transport and the HTTP adapters.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            max_output_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub params: GenerationParams,
}

/// Outcome of a single transport attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    Transient(String),
    RateLimited {
        retry_after_ms: Option<u64>,
    },
    Auth(String),
    /// The offline transport has no scripted reply for this prompt.
    Unscripted(String),
    Fatal(String),
}

impl std::fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Transient(m) => write!(f, "transient: {m}"),
            Self::RateLimited { retry_after_ms } => write!(f, "rate limited (retry after {retry_after_ms:?} ms)"),
            Self::Auth(m) => write!(f, "auth: {m}"),
            Self::Unscripted(m) => write!(f, "unscripted prompt: {m}"),
            Self::Fatal(m) => write!(f, "fatal: {m}"),
        }
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &CompletionRequest) -> Result<String, TransportFailure>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiKind {
    Gemini,
    OpenAi,
    Ollama,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmEndpointConfig {
    pub provider_tag: String,
    pub api: ApiKind,
    #[serde(default)]
    pub base_url: String,
    /// Model identifier sent to the provider; defaults to `provider_tag`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env_var: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
}

fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}
fn default_timeout() -> u64 {
    60
}
fn default_temperature() -> f64 {
    GenerationParams::default().temperature
}
fn default_max_tokens() -> u32 {
    GenerationParams::default().max_output_tokens
}

impl LlmEndpointConfig {
    pub fn mock(provider_tag: impl Into<String>) -> Self {
        Self {
            provider_tag: provider_tag.into(),
            api: ApiKind::Mock,
            base_url: String::new(),
            model: None,
            api_key_env_var: None,
            max_retries: default_retries(),
            backoff_base_ms: 0,
            max_concurrency: default_concurrency(),
            timeout_secs: default_timeout(),
            temperature: default_temperature(),
            max_output_tokens: default_max_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.provider_tag.trim().is_empty() {
            return Err("provider_tag is empty".into());
        }
        if self.max_concurrency == 0 {
            return Err(format!("{}: max_concurrency must be at least 1", self.provider_tag));
        }
        if self.api != ApiKind::Mock && self.base_url.trim().is_empty() {
            return Err(format!("{}: base_url is required", self.provider_tag));
        }
        Ok(())
    }

    pub fn model_id(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.provider_tag)
    }

    pub fn params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }
}

/// JSON-over-HTTP adapter for one vendor schema.
#[derive(Debug)]
pub struct HttpTransport {
    api: ApiKind,
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    /// Reads the API key from the configured environment variable.
    pub fn from_config(cfg: &LlmEndpointConfig) -> Result<Self, TransportFailure> {
        let api_key = match &cfg.api_key_env_var {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| TransportFailure::Auth(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        if matches!(cfg.api, ApiKind::Gemini | ApiKind::OpenAi) && api_key.is_none() {
            return Err(TransportFailure::Auth(format!(
                "{} requires api_key_env_var",
                cfg.provider_tag
            )));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build();
        Ok(Self {
            api: cfg.api,
            base_url: cfg.base_url.trim_end_matches('/').to_owned(),
            api_key,
            agent,
        })
    }

    fn build(&self, req: &CompletionRequest) -> (String, Value) {
        let p = &req.params;
        match self.api {
            ApiKind::Gemini => (
                format!("{}/v1beta/models/{}:generateContent", self.base_url, req.model),
                json!({
                    "contents": [{"role": "user", "parts": [{"text": req.prompt}]}],
                    "generationConfig": {"temperature": p.temperature, "maxOutputTokens": p.max_output_tokens}
                }),
            ),
            ApiKind::OpenAi => (
                format!("{}/v1/chat/completions", self.base_url),
                json!({
                    "model": req.model,
                    "messages": [{"role": "user", "content": req.prompt}],
                    "temperature": p.temperature,
                    "max_tokens": p.max_output_tokens
                }),
            ),
            ApiKind::Ollama | ApiKind::Mock => (
                format!("{}/api/generate", self.base_url),
                json!({
                    "model": req.model,
                    "prompt": req.prompt,
                    "stream": false,
                    "options": {"temperature": p.temperature, "num_predict": p.max_output_tokens}
                }),
            ),
        }
    }
}

/// Pull the completion text out of a vendor response body.
pub fn extract_text(api: ApiKind, body: &Value) -> Option<String> {
    let text = match api {
        ApiKind::Gemini => body
            .pointer("/candidates/0/content/parts")?
            .as_array()?
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<String>(),
        ApiKind::OpenAi => body.pointer("/choices/0/message/content")?.as_str()?.to_owned(),
        ApiKind::Ollama | ApiKind::Mock => body.get("response")?.as_str()?.to_owned(),
    };
    Some(text)
}

/// Map an HTTP status to the retry classification.
pub fn classify_status(status: u16, retry_after: Option<&str>, body: String) -> TransportFailure {
    match status {
        401 | 403 => TransportFailure::Auth(format!("HTTP {status}")),
        429 => TransportFailure::RateLimited {
            retry_after_ms: retry_after.and_then(|s| s.trim().parse::<u64>().ok()).map(|s| s * 1000),
        },
        408 | 500..=599 => TransportFailure::Transient(format!("HTTP {status}")),
        _ => TransportFailure::Fatal(format!("HTTP {status}: {body}")),
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &CompletionRequest) -> Result<String, TransportFailure> {
        let (url, body) = self.build(request);
        let mut req = self.agent.post(&url).set("content-type", "application/json");
        if let Some(key) = &self.api_key {
            req = match self.api {
                ApiKind::Gemini => req.set("x-goog-api-key", key),
                _ => req.set("authorization", &format!("Bearer {key}")),
            };
        }
        match req.send_json(body) {
            Ok(resp) => {
                let v: Value = resp
                    .into_json()
                    .map_err(|e| TransportFailure::Transient(format!("reading response: {e}")))?;
                extract_text(self.api, &v)
                    .ok_or_else(|| TransportFailure::Fatal(format!("unexpected response shape: {v}")))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let retry_after = resp.header("retry-after").map(str::to_owned);
                let text = resp.into_string().unwrap_or_default();
                Err(classify_status(code, retry_after.as_deref(), text))
            }
            Err(ureq::Error::Transport(t)) => Err(TransportFailure::Transient(t.to_string())),
        }
    }
}
