//! LLM transport, prompt rendering, batched fallback and the description
//! orchestrators.

pub mod client;
pub mod fallback;
pub mod mock;
pub mod orchestrate;
pub mod prompt;
pub mod transport;

pub use client::{Gateway, GatewayError, TranscriptEntry};
pub use fallback::{fallback_describe, FallbackError, FallbackOutcome, FALLBACK_BATCH_SIZE};
pub use mock::{Reply, Rule, Script, ScriptedTransport};
pub use orchestrate::{
    describe_agentic, describe_fusion, generate_description, resolve_features, AgenticContext, DescribeError,
    DescribeMode, DescribeStats, DescriptionRecord, FeatureSource, FeatureSourceRecord, FusionEndpoints,
    ResolvedFeatures, SourceCounts,
};
pub use prompt::{
    prompt_hash, render_agentic_prompt, render_fusion_prompt, render_generator_prompt, PromptContext, PromptError,
};
pub use transport::{ApiKind, CompletionRequest, GenerationParams, LlmEndpointConfig, Transport, TransportFailure};
