//! TOML pipeline configuration.
//!
//! Every key is optional; absent keys take the defaults below. Command-line
//! flags override the file.
//!
//! ```toml
//! seed = 0
//!
//! [paths]
//! corpus_dir = "corpus"
//! cache_file = "cache.jsonl"
//! stopwords = "stopwords.txt"   # omit to use the built-in list
//! output_dir = "out"
//!
//! [matcher]
//! fuzzy_threshold = 0.65
//!
//! [ensemble]
//! weight_sparse = 0.5
//! weight_dense = 0.5
//! rrf_k = 60
//! top_n = 3
//!
//! [embedder]
//! kind = "hashed"               # or "remote" with `endpoint`
//! dim = 256
//!
//! [endpoints.agentic]
//! provider_tag = "gemini"
//! model = "gemini-2.0-flash-lite"
//! api = "gemini"
//! base_url = "https://generativelanguage.googleapis.com"
//! api_key_env_var = "GEMINI_API_KEY"
//!
//! [classifier]
//! kind = "baseline"             # or "external" with `endpoint`
//! ```

use std::path::{Path, PathBuf};

use dexter_core::classify::{ExternalEndpoint, TrainConfig};
use dexter_core::gateway::{ApiKind, LlmEndpointConfig};
use dexter_core::matcher::MatcherConfig;
use dexter_core::retrieval::{Bm25Params, EnsembleConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default = "default_corpus_dir")]
    pub corpus_dir: PathBuf,
    #[serde(default = "default_cache_file")]
    pub cache_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_corpus_dir() -> PathBuf {
    "corpus".into()
}
fn default_cache_file() -> PathBuf {
    "cache.jsonl".into()
}
fn default_output_dir() -> PathBuf {
    "out".into()
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus_dir: default_corpus_dir(),
            cache_file: default_cache_file(),
            stopwords: None,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Hashed {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        endpoint: String,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<String>,
    },
}

fn default_dim() -> usize {
    256
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self::Hashed { dim: default_dim() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    #[serde(default = "gemini")]
    pub agentic: LlmEndpointConfig,
    #[serde(default = "llama2")]
    pub fusion_gen_a: LlmEndpointConfig,
    #[serde(default = "mistral")]
    pub fusion_gen_b: LlmEndpointConfig,
    #[serde(default = "gemini")]
    pub fusion: LlmEndpointConfig,
}

fn hosted(tag: &str, api: ApiKind, base_url: &str, key: Option<&str>) -> LlmEndpointConfig {
    LlmEndpointConfig {
        provider_tag: tag.into(),
        api,
        base_url: base_url.into(),
        api_key_env_var: key.map(Into::into),
        backoff_base_ms: 500,
        ..LlmEndpointConfig::mock(tag)
    }
}

fn gemini() -> LlmEndpointConfig {
    LlmEndpointConfig {
        model: Some("gemini-2.0-flash-lite".into()),
        ..hosted(
            "gemini",
            ApiKind::Gemini,
            "https://generativelanguage.googleapis.com",
            Some("GEMINI_API_KEY"),
        )
    }
}

fn llama2() -> LlmEndpointConfig {
    hosted("llama2", ApiKind::Ollama, "http://localhost:11434", None)
}

fn mistral() -> LlmEndpointConfig {
    hosted("mistral", ApiKind::Ollama, "http://localhost:11434", None)
}

impl Default for Endpoints {
    fn default() -> Self {
        Self {
            agentic: gemini(),
            fusion_gen_a: llama2(),
            fusion_gen_b: mistral(),
            fusion: gemini(),
        }
    }
}

impl Endpoints {
    pub fn all(&self) -> [(&'static str, &LlmEndpointConfig); 4] {
        [
            ("agentic", &self.agentic),
            ("fusion_gen_a", &self.fusion_gen_a),
            ("fusion_gen_b", &self.fusion_gen_b),
            ("fusion", &self.fusion),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierChoice {
    Baseline,
    External {
        endpoint: ExternalEndpoint,
        #[serde(default = "default_external_timeout")]
        timeout_secs: u64,
    },
}

fn default_external_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub matcher: MatcherConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub endpoints: Endpoints,
    #[serde(default = "baseline")]
    pub classifier: ClassifierChoice,
    #[serde(default)]
    pub train: TrainSettings,
}

fn baseline() -> ClassifierChoice {
    ClassifierChoice::Baseline
}

/// Training knobs; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            max_epochs: d.max_epochs,
            patience: d.patience,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            matcher: MatcherConfig::default(),
            ensemble: EnsembleConfig::default(),
            bm25: Bm25Params::default(),
            embedder: EmbedderConfig::default(),
            endpoints: Endpoints::default(),
            classifier: ClassifierChoice::Baseline,
            train: TrainSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            seed: self.seed,
        }
    }

    /// Value checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.matcher
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ensemble
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (name, ep) in self.endpoints.all() {
            ep.validate()
                .map_err(|e| ConfigError::Invalid(format!("endpoints.{name}: {e}")))?;
        }
        let dim = match &self.embedder {
            EmbedderConfig::Hashed { dim } | EmbedderConfig::Remote { dim, .. } => *dim,
        };
        if dim == 0 {
            return Err(ConfigError::Invalid("embedder.dim must be positive".into()));
        }
        if self.train.learning_rate <= 0.0 || !self.train.learning_rate.is_finite() {
            return Err(ConfigError::Invalid("train.learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Check that the paths a describe run reads from exist.
    pub fn validate_describe_paths(&self) -> Result<(), ConfigError> {
        if !self.paths.corpus_dir.is_dir() {
            return Err(ConfigError::Invalid(format!(
                "corpus directory {} does not exist",
                self.paths.corpus_dir.display()
            )));
        }
        Ok(())
    }

    pub fn validate_stopwords_path(&self) -> Result<(), ConfigError> {
        match &self.paths.stopwords {
            Some(p) if !p.is_file() => Err(ConfigError::Invalid(format!(
                "stopword file {} does not exist",
                p.display()
            ))),
            _ => Ok(()),
        }
    }
}
