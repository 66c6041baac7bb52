//! Named completion endpoints with retries, bounded concurrency and an
//! append-only transcript.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::prompt_hash;
use super::transport::{CompletionRequest, HttpTransport, LlmEndpointConfig, Transport, TransportFailure};
use crate::cache::now_secs;

const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Error, Debug)]
pub enum GatewayError {
    #[error("no endpoint named `{0}`")]
    UnknownEndpoint(String),
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("{endpoint}: transport failed after {attempts} attempts: {last}")]
    TransportError {
        endpoint: String,
        attempts: u32,
        last: String,
    },
    #[error("{endpoint}: authentication failed: {reason}")]
    AuthError { endpoint: String, reason: String },
    #[error("{endpoint}: still rate limited after {attempts} attempts")]
    RateLimited { endpoint: String, attempts: u32 },
    #[error("{endpoint}: empty completion")]
    EmptyCompletion { endpoint: String },
    #[error("{endpoint}: offline transport has no reply for prompt {prompt_hash}")]
    Unscripted { endpoint: String, prompt_hash: String },
    #[error("writing transcript: {0}")]
    Transcript(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub endpoint: String,
    pub provider_tag: String,
    pub prompt: String,
    pub prompt_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
    pub attempts: u32,
    pub timestamp: u64,
}

#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("permit lock poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("permit lock poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("permit lock poisoned") += 1;
        self.0.cv.notify_one();
    }
}

struct Endpoint {
    cfg: LlmEndpointConfig,
    transport: Arc<dyn Transport>,
    permits: Permits,
}

#[derive(Default)]
struct TranscriptLog {
    entries: Vec<TranscriptEntry>,
    sink: Option<BufWriter<File>>,
}

/// Shared across worker threads; per-endpoint concurrency is bounded by
/// `max_concurrency`.
#[derive(Default)]
pub struct Gateway {
    endpoints: HashMap<String, Endpoint>,
    transcript: Mutex<TranscriptLog>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names: Vec<_> = self.endpoints.keys().collect();
        names.sort();
        f.debug_struct("Gateway").field("endpoints", &names).finish()
    }
}

fn backoff(base_ms: u64, retry: u32) -> Duration {
    let ms = base_ms.saturating_mul(1u64 << retry.min(20));
    Duration::from_millis(ms).min(MAX_BACKOFF)
}

impl Gateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        cfg: LlmEndpointConfig,
        transport: Arc<dyn Transport>,
    ) -> Result<(), GatewayError> {
        cfg.validate().map_err(GatewayError::InvalidConfig)?;
        let permits = Permits::new(cfg.max_concurrency);
        self.endpoints.insert(
            name.into(),
            Endpoint {
                cfg,
                transport,
                permits,
            },
        );
        Ok(())
    }

    /// Register an endpoint backed by its vendor HTTP adapter.
    pub fn register_http(&mut self, name: impl Into<String>, cfg: LlmEndpointConfig) -> Result<(), GatewayError> {
        let name = name.into();
        let transport = HttpTransport::from_config(&cfg).map_err(|f| GatewayError::AuthError {
            endpoint: name.clone(),
            reason: f.to_string(),
        })?;
        self.register(name, cfg, Arc::new(transport))
    }

    /// Also append every transcript entry to a JSON Lines file.
    pub fn with_transcript_file(self, path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.transcript.lock().expect("transcript lock poisoned").sink = Some(BufWriter::new(file));
        Ok(self)
    }

    pub fn endpoint_config(&self, name: &str) -> Option<&LlmEndpointConfig> {
        self.endpoints.get(name).map(|e| &e.cfg)
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript
            .lock()
            .expect("transcript lock poisoned")
            .entries
            .clone()
    }

    /// Send `prompt` to the named endpoint, retrying transient failures and
    /// rate limits with exponential backoff. Records one transcript entry.
    pub fn complete(&self, endpoint: &str, prompt: &str) -> Result<String, GatewayError> {
        let ep = self
            .endpoints
            .get(endpoint)
            .ok_or_else(|| GatewayError::UnknownEndpoint(endpoint.to_owned()))?;
        let request = CompletionRequest {
            model: ep.cfg.model_id().to_owned(),
            prompt: prompt.to_owned(),
            params: ep.cfg.params(),
        };
        let started = Instant::now();
        let mut attempts = 0u32;
        let outcome = {
            let _permit = ep.permits.acquire();
            loop {
                attempts += 1;
                let res = ep.transport.send(&request);
                let retry_wait = match &res {
                    Err(TransportFailure::Transient(_)) => Some(backoff(ep.cfg.backoff_base_ms, attempts - 1)),
                    Err(TransportFailure::RateLimited { retry_after_ms }) => {
                        let b = backoff(ep.cfg.backoff_base_ms, attempts - 1);
                        Some(retry_after_ms.map_or(b, |ms| Duration::from_millis(ms).min(MAX_BACKOFF).max(b)))
                    }
                    _ => None,
                };
                match retry_wait {
                    Some(wait) if attempts <= ep.cfg.max_retries => {
                        tracing::debug!(stage = "gateway", endpoint, attempts, "retrying after {:?}", wait);
                        std::thread::sleep(wait);
                    }
                    _ => break res,
                }
            }
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        let hash = prompt_hash(prompt);
        let result = match outcome {
            Ok(text) if text.trim().is_empty() => Err(GatewayError::EmptyCompletion {
                endpoint: endpoint.to_owned(),
            }),
            Ok(text) => Ok(text),
            Err(TransportFailure::Transient(m) | TransportFailure::Fatal(m)) => Err(GatewayError::TransportError {
                endpoint: endpoint.to_owned(),
                attempts,
                last: m,
            }),
            Err(TransportFailure::RateLimited { .. }) => Err(GatewayError::RateLimited {
                endpoint: endpoint.to_owned(),
                attempts,
            }),
            Err(TransportFailure::Auth(reason)) => Err(GatewayError::AuthError {
                endpoint: endpoint.to_owned(),
                reason,
            }),
            Err(TransportFailure::Unscripted(_)) => Err(GatewayError::Unscripted {
                endpoint: endpoint.to_owned(),
                prompt_hash: hash.clone(),
            }),
        };
        self.record(
            endpoint,
            &ep.cfg.provider_tag,
            prompt,
            hash,
            &result,
            latency_ms,
            attempts,
        )?;
        result
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        endpoint: &str,
        provider_tag: &str,
        prompt: &str,
        prompt_hash: String,
        result: &Result<String, GatewayError>,
        latency_ms: u64,
        attempts: u32,
    ) -> Result<(), GatewayError> {
        let mut log = self.transcript.lock().expect("transcript lock poisoned");
        let entry = TranscriptEntry {
            seq: log.entries.len() as u64,
            endpoint: endpoint.to_owned(),
            provider_tag: provider_tag.to_owned(),
            prompt: prompt.to_owned(),
            prompt_hash,
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
            latency_ms,
            attempts,
            timestamp: now_secs(),
        };
        if let Some(sink) = log.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &entry).map_err(std::io::Error::from)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        log.entries.push(entry);
        Ok(())
    }
}
