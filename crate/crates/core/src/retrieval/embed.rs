//! Text embedders for the dense ranker.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::RetrievalError;
use crate::hashing::fnv1a;

pub trait Embedder: Send + Sync {
    /// Identity and version of the embedding function.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError>;
}

pub fn l2_normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Character 3-grams of the lower-cased text hashed into `dim` buckets,
/// term-frequency weighted and L2-normalized. Text shorter than three
/// characters is a single gram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedTrigramEmbedder {
    dim: usize,
}

impl HashedTrigramEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl Embedder for HashedTrigramEmbedder {
    fn id(&self) -> String {
        format!("hashed-trigram/fnv1a/v1/d{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut v = vec![0.0; self.dim];
        let mut bump = |gram: &[char]| {
            let s: String = gram.iter().collect();
            v[(fnv1a(s.as_bytes()) % self.dim as u64) as usize] += 1.0;
        };
        if chars.len() < 3 {
            bump(&chars);
        } else {
            chars.windows(3).for_each(&mut bump);
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    pub dim: usize,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    30
}

/// Client for an HTTP embedding endpoint. Sends `{"input": text, "model": ...}`
/// and accepts either `{"embedding": [...]}` or `{"data": [{"embedding": [...]}]}`.
pub struct RemoteEmbedder {
    cfg: RemoteEmbedderConfig,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(cfg: RemoteEmbedderConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build();
        Self { cfg, agent }
    }
}

fn parse_embedding(body: &Value) -> Option<Vec<f64>> {
    let arr = body
        .get("embedding")
        .or_else(|| body.pointer("/data/0/embedding"))?
        .as_array()?;
    arr.iter().map(Value::as_f64).collect()
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!(
            "remote/{}/{}",
            self.cfg.model.as_deref().unwrap_or("default"),
            self.cfg.endpoint
        )
    }

    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let body = serde_json::json!({ "input": text, "model": self.cfg.model });
        let resp: Value = self
            .agent
            .post(&self.cfg.endpoint)
            .send_json(body)
            .map_err(|e| RetrievalError::Transport(e.to_string()))?
            .into_json()
            .map_err(|e| RetrievalError::Transport(e.to_string()))?;
        let mut v =
            parse_embedding(&resp).ok_or_else(|| RetrievalError::Transport("response has no embedding".into()))?;
        if v.len() != self.cfg.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.cfg.dim,
                got: v.len(),
            });
        }
        if !l2_normalize(&mut v) {
            return Err(RetrievalError::Transport("zero embedding".into()));
        }
        Ok(v)
    }
}
