//! End-to-end description generation for one APK.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::client::{Gateway, GatewayError};
use super::fallback::{fallback_describe, FallbackError};
use super::prompt::{
    format_described_features, format_raw_features, prompt_hash, render_agentic_prompt, render_fusion_prompt,
    render_generator_prompt, PromptContext, PromptError,
};
use crate::cache::{now_secs, CacheEntry, CacheError, CacheSource, DescriptionCache};
use crate::corpus::KnowledgeCorpus;
use crate::features::{FeatureCategory, StaticFeatureSet};
use crate::matcher::MatcherConfig;
use crate::retrieval::{retrieve_description, EnsembleConfig, Retrieval, RetrievalError, RetrievalIndexes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Corpus,
    Cache,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSourceRecord {
    pub category: FeatureCategory,
    pub name: String,
    pub source: FeatureSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DescribeMode {
    AgenticRag,
    Fusion {
        fusion_provider: String,
        gen_provider_a: String,
        gen_provider_b: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub apk_id: String,
    pub mode: DescribeMode,
    pub description: String,
    pub prompt_hash: String,
    pub feature_sources: Vec<FeatureSourceRecord>,
    pub created_at: u64,
}

impl DescriptionRecord {
    pub fn source_counts(&self) -> SourceCounts {
        let mut c = SourceCounts::default();
        for f in &self.feature_sources {
            match f.source {
                FeatureSource::Corpus => c.corpus += 1,
                FeatureSource::Cache => c.cache += 1,
                FeatureSource::Llm => c.llm += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceCounts {
    pub corpus: usize,
    pub cache: usize,
    pub llm: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DescribeStats {
    pub cache_hits: usize,
    pub retrieval_calls: usize,
    /// Batched plus single-feature fallback prompts.
    pub fallback_calls: usize,
    pub fallback_batches: usize,
    pub completion_calls: usize,
}

impl std::ops::AddAssign for DescribeStats {
    fn add_assign(&mut self, o: Self) {
        self.cache_hits += o.cache_hits;
        self.retrieval_calls += o.retrieval_calls;
        self.fallback_calls += o.fallback_calls;
        self.fallback_batches += o.fallback_batches;
        self.completion_calls += o.completion_calls;
    }
}

#[derive(Error, Debug)]
pub enum DescribeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Fallback(#[from] FallbackError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl DescribeError {
    /// True when the failure came from the completion transport.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            DescribeError::Gateway(_)
                | DescribeError::Fallback(FallbackError::Gateway(_) | FallbackError::IncompleteBatch(_))
        )
    }
}

type Resolved = (String, FeatureSource);

/// Shared, read-mostly state for agentic description runs.
#[derive(Debug, Clone, Copy)]
pub struct AgenticContext<'a> {
    pub corpus: &'a KnowledgeCorpus,
    pub indexes: &'a RetrievalIndexes,
    pub cache: &'a DescriptionCache,
    pub gateway: &'a Gateway,
    pub matcher: &'a MatcherConfig,
    pub ensemble: &'a EnsembleConfig,
    /// Endpoint for both fallback and the final completion.
    pub endpoint: &'a str,
}

/// Every feature of one APK with its description and where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedFeatures<'f> {
    features: &'f StaticFeatureSet,
    resolved: Vec<(FeatureCategory, &'f str, String, FeatureSource)>,
    pub stats: DescribeStats,
}

impl ResolvedFeatures<'_> {
    pub fn apk_id(&self) -> &str {
        &self.features.apk_id
    }
}

/// Resolve every feature through cache, retrieval, then batched fallback.
pub fn resolve_features<'f>(
    features: &'f StaticFeatureSet,
    ctx: &AgenticContext<'_>,
) -> Result<ResolvedFeatures<'f>, DescribeError> {
    let mut stats = DescribeStats::default();
    let mut resolved: Vec<(FeatureCategory, &str, Option<Resolved>)> = Vec::with_capacity(features.len());
    let mut missing = Vec::new();

    for (category, name) in features.iter() {
        if let Some(hit) = ctx.cache.get(category, name) {
            stats.cache_hits += 1;
            resolved.push((category, name, Some((hit.description, FeatureSource::Cache))));
            continue;
        }
        stats.retrieval_calls += 1;
        match retrieve_description(name, category, ctx.corpus, ctx.indexes, ctx.matcher, ctx.ensemble)? {
            Retrieval::Retrieved { entries, .. } => {
                let desc = entries[0].description.clone();
                ctx.cache
                    .put(CacheEntry::new(category, name, desc.clone(), CacheSource::Corpus))?;
                resolved.push((category, name, Some((desc, FeatureSource::Corpus))));
            }
            Retrieval::Miss => {
                missing.push((category, name.to_owned()));
                resolved.push((category, name, None));
            }
        }
    }

    if !missing.is_empty() {
        let out = fallback_describe(&missing, ctx.gateway, ctx.endpoint, ctx.cache)?;
        stats.fallback_calls += out.calls();
        stats.fallback_batches += out.batch_calls;
        for (category, name, slot) in resolved.iter_mut().filter(|r| r.2.is_none()) {
            let desc = out
                .get(*category, name)
                .expect("fallback describes every requested feature");
            *slot = Some((desc.to_owned(), FeatureSource::Llm));
        }
    }

    let resolved = resolved
        .into_iter()
        .map(|(c, n, d)| {
            let (desc, source) = d.expect("all features resolved");
            (c, n, desc, source)
        })
        .collect();
    Ok(ResolvedFeatures {
        features,
        resolved,
        stats,
    })
}

/// Render the agentic prompt from resolved features and ask the model for
/// the final description.
pub fn generate_description(
    r: ResolvedFeatures<'_>,
    gateway: &Gateway,
    endpoint: &str,
) -> Result<(DescriptionRecord, DescribeStats), DescribeError> {
    let features = r.features;
    let mut stats = r.stats;
    let formatted_info = format_described_features(r.resolved.iter().map(|(c, n, d, _)| (*c, *n, d.as_str())));
    let prompt = render_agentic_prompt(&PromptContext {
        apk_name: features.apk_id.clone(),
        stats: features.stats(),
        formatted_info,
    });
    let description = gateway.complete(endpoint, &prompt)?;
    stats.completion_calls += 1;

    let feature_sources = r
        .resolved
        .into_iter()
        .map(|(category, name, _, source)| FeatureSourceRecord {
            category,
            name: name.to_owned(),
            source,
        })
        .collect();
    let record = DescriptionRecord {
        apk_id: features.apk_id.clone(),
        mode: DescribeMode::AgenticRag,
        description: description.trim().to_owned(),
        prompt_hash: prompt_hash(&prompt),
        feature_sources,
        created_at: now_secs(),
    };
    Ok((record, stats))
}

/// Resolve, then generate, for one APK.
pub fn describe_agentic(
    features: &StaticFeatureSet,
    ctx: &AgenticContext<'_>,
) -> Result<(DescriptionRecord, DescribeStats), DescribeError> {
    generate_description(resolve_features(features, ctx)?, ctx.gateway, ctx.endpoint)
}

/// Endpoint names for the two generators and the fusing model.
#[derive(Debug, Clone, Copy)]
pub struct FusionEndpoints<'a> {
    pub gen_a: &'a str,
    pub gen_b: &'a str,
    pub fusion: &'a str,
}

/// Two independent descriptions from the raw feature lists, merged by a
/// third model.
pub fn describe_fusion(
    features: &StaticFeatureSet,
    gateway: &Gateway,
    endpoints: FusionEndpoints<'_>,
) -> Result<(DescriptionRecord, DescribeStats), DescribeError> {
    let static_features_str = format_raw_features(features);
    let generator_prompt = render_generator_prompt(&static_features_str);
    let description1 = gateway.complete(endpoints.gen_a, &generator_prompt)?;
    let description2 = gateway.complete(endpoints.gen_b, &generator_prompt)?;
    let prompt = render_fusion_prompt(
        &features.apk_id,
        &static_features_str,
        description1.trim(),
        description2.trim(),
    )?;
    let description = gateway.complete(endpoints.fusion, &prompt)?;

    let tag = |name: &str| {
        gateway
            .endpoint_config(name)
            .map_or_else(|| name.to_owned(), |c| c.provider_tag.clone())
    };
    let record = DescriptionRecord {
        apk_id: features.apk_id.clone(),
        mode: DescribeMode::Fusion {
            fusion_provider: tag(endpoints.fusion),
            gen_provider_a: tag(endpoints.gen_a),
            gen_provider_b: tag(endpoints.gen_b),
        },
        description: description.trim().to_owned(),
        prompt_hash: prompt_hash(&prompt),
        feature_sources: features
            .iter()
            .map(|(category, name)| FeatureSourceRecord {
                category,
                name: name.to_owned(),
                source: FeatureSource::Llm,
            })
            .collect(),
        created_at: now_secs(),
    };
    let stats = DescribeStats {
        completion_calls: 3,
        ..Default::default()
    };
    Ok((record, stats))
}
