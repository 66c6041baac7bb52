//! The `describe` subcommand.

use std::sync::Arc;
use std::time::Instant;

use dexter_core::cache::DescriptionCache;
use dexter_core::corpus::load_corpus;
use dexter_core::features::load_features_json;
use dexter_core::gateway::{
    describe_fusion, generate_description, resolve_features, AgenticContext, DescribeError, DescribeStats, Gateway,
    GatewayError, Script, ScriptedTransport, SourceCounts,
};
use dexter_core::retrieval::{Embedder, HashedTrigramEmbedder, RemoteEmbedder, RemoteEmbedderConfig, RetrievalIndexes};
use serde_json::json;

use crate::args::{DescribeArgs, Mode};
use crate::config::{EmbedderConfig, PipelineConfig};
use crate::{data, io, pool, CliError};

const AGENTIC: &str = "agentic";
const GEN_A: &str = "fusion_gen_a";
const GEN_B: &str = "fusion_gen_b";
const FUSION: &str = "fusion";

fn gateway_error(e: GatewayError) -> CliError {
    match e {
        GatewayError::UnknownEndpoint(_) | GatewayError::InvalidConfig(_) | GatewayError::Transcript(_) => data(e),
        other => CliError::Transport(other.to_string()),
    }
}

fn describe_error(apk_id: &str, e: DescribeError) -> CliError {
    let msg = format!("{apk_id}: {e}");
    if e.is_transport() {
        CliError::Transport(msg)
    } else {
        CliError::Data(msg)
    }
}

fn embedder(cfg: &EmbedderConfig) -> Arc<dyn Embedder> {
    match cfg {
        EmbedderConfig::Hashed { dim } => Arc::new(HashedTrigramEmbedder::new(*dim)),
        EmbedderConfig::Remote { endpoint, dim, model } => Arc::new(RemoteEmbedder::new(RemoteEmbedderConfig {
            endpoint: endpoint.clone(),
            dim: *dim,
            model: model.clone(),
            timeout_secs: 30,
        })),
    }
}

fn build_gateway(args: &DescribeArgs, cfg: &PipelineConfig) -> Result<Gateway, CliError> {
    let used: &[&str] = match args.mode {
        Mode::AgenticRag => &[AGENTIC],
        Mode::Fusion => &[GEN_A, GEN_B, FUSION],
    };
    let mut gateway = Gateway::new();
    let endpoints = cfg.endpoints.all().into_iter().filter(|(name, _)| used.contains(name));
    if args.offline {
        let script = match &args.mock_script {
            Some(p) => Script::load(p).map_err(|e| data(format!("{}: {e}", p.display())))?,
            None => Script::default(),
        };
        let transport = Arc::new(ScriptedTransport::new(script));
        for (name, ep) in endpoints {
            let mut ep = ep.clone();
            ep.backoff_base_ms = 0;
            gateway.register(name, ep, transport.clone()).map_err(gateway_error)?;
        }
    } else {
        for (name, ep) in endpoints {
            gateway.register_http(name, ep.clone()).map_err(gateway_error)?;
        }
    }
    match &args.transcript {
        Some(p) => gateway.with_transcript_file(p).map_err(gateway_error),
        None => Ok(gateway),
    }
}

pub fn run(args: DescribeArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    if let Some(t) = args.fuzzy_threshold {
        cfg.matcher.fuzzy_threshold = t;
        cfg.matcher
            .validate()
            .map_err(|e| CliError::Usage(format!("--fuzzy-threshold: {e}")))?;
    }
    if let Some(c) = &args.corpus {
        cfg.paths.corpus_dir = c.clone();
    }
    if let Some(c) = &args.cache {
        cfg.paths.cache_file = c.clone();
    }
    let features = load_features_json(&args.features).map_err(|e| data(format!("{}: {e}", args.features.display())))?;
    let gateway = build_gateway(&args, &cfg)?;
    let workers = pool::workers(args.workers);

    let results = match args.mode {
        Mode::AgenticRag => {
            cfg.validate_describe_paths().map_err(data)?;
            let corpus = load_corpus(&cfg.paths.corpus_dir).map_err(data)?;
            let indexes = RetrievalIndexes::build(&corpus, embedder(&cfg.embedder), cfg.bm25).map_err(data)?;
            let (cache, _corrupt) = DescriptionCache::load(&cfg.paths.cache_file).map_err(data)?;
            let ctx = AgenticContext {
                corpus: &corpus,
                indexes: &indexes,
                cache: &cache,
                gateway: &gateway,
                matcher: &cfg.matcher,
                ensemble: &cfg.ensemble,
                endpoint: AGENTIC,
            };
            let mut resolved = Vec::with_capacity(features.len());
            for set in &features {
                match resolve_features(set, &ctx) {
                    Ok(r) => resolved.push(r),
                    Err(e) => {
                        cache.sync().map_err(data)?;
                        return Err(describe_error(&set.apk_id, e));
                    }
                }
            }
            let results = pool::par_map(&resolved, workers, |r| {
                let t = Instant::now();
                let out =
                    generate_description(r.clone(), &gateway, AGENTIC).map_err(|e| describe_error(r.apk_id(), e))?;
                log_apk(&out.0.apk_id, &out.1, out.0.source_counts(), t);
                Ok(out)
            });
            cache.sync().map_err(data)?;
            results?
        }
        Mode::Fusion => {
            let eps = dexter_core::gateway::FusionEndpoints {
                gen_a: GEN_A,
                gen_b: GEN_B,
                fusion: FUSION,
            };
            pool::par_map(&features, workers, |set| {
                let t = Instant::now();
                let out = describe_fusion(set, &gateway, eps).map_err(|e| describe_error(&set.apk_id, e))?;
                log_apk(&out.0.apk_id, &out.1, out.0.source_counts(), t);
                Ok(out)
            })?
        }
    };

    let mut stats = DescribeStats::default();
    let mut sources = SourceCounts::default();
    let mut records = Vec::with_capacity(results.len());
    for (record, s) in results {
        stats += s;
        let c = record.source_counts();
        sources.corpus += c.corpus;
        sources.cache += c.cache;
        sources.llm += c.llm;
        records.push(record);
    }
    io::write_jsonl(&args.output, &records)?;
    println!(
        "{}",
        json!({
            "stage": "describe",
            "mode": match args.mode { Mode::AgenticRag => "agentic-rag", Mode::Fusion => "fusion" },
            "apks": records.len(),
            "cache_hits": stats.cache_hits,
            "retrieval_calls": stats.retrieval_calls,
            "fallback_calls": stats.fallback_calls,
            "fallback_batches": stats.fallback_batches,
            "completion_calls": stats.completion_calls,
            "sources": { "corpus": sources.corpus, "cache": sources.cache, "llm": sources.llm },
        })
    );
    Ok(())
}

fn log_apk(apk_id: &str, stats: &DescribeStats, sources: SourceCounts, started: Instant) {
    tracing::info!(
        stage = "describe",
        apk_id,
        elapsed_ms = started.elapsed().as_millis() as u64,
        cache_hits = stats.cache_hits,
        retrieval_calls = stats.retrieval_calls,
        fallback_calls = stats.fallback_calls,
        completion_calls = stats.completion_calls,
        corpus = sources.corpus,
        cache = sources.cache,
        llm = sources.llm,
    );
}
