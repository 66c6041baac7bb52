//! Batched LLM descriptions for features the corpus does not cover.

use thiserror::Error;

use super::client::{Gateway, GatewayError};
use super::prompt::{render_fallback_batch_prompt, render_fallback_single_prompt};
use crate::cache::{CacheEntry, CacheError, CacheSource, DescriptionCache};
use crate::features::{fold, FeatureCategory};

pub const FALLBACK_BATCH_SIZE: usize = 25;

#[derive(Error, Debug)]
pub enum FallbackError {
    #[error("no missing features to describe")]
    EmptyRequest,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no description for {} feature(s): {}", .0.len(), .0.join(", "))]
    IncompleteBatch(Vec<String>),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FallbackOutcome {
    /// `(category, name, description)` in request order.
    pub descriptions: Vec<(FeatureCategory, String, String)>,
    pub batch_calls: usize,
    pub single_calls: usize,
}

impl FallbackOutcome {
    pub fn calls(&self) -> usize {
        self.batch_calls + self.single_calls
    }

    pub fn get(&self, category: FeatureCategory, name: &str) -> Option<&str> {
        self.descriptions
            .iter()
            .find(|(c, n, _)| *c == category && n == name)
            .map(|(_, _, d)| d.as_str())
    }
}

fn strip_marker(line: &str) -> &str {
    let line = line.trim_start_matches(|c: char| c == '-' || c == '*' || c == '•' || c.is_whitespace());
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    let line = if digits > 0 && matches!(line.as_bytes().get(digits), Some(b'.' | b')')) {
        line[digits + 1..].trim_start()
    } else {
        line
    };
    match line.strip_prefix('[').and_then(|r| r.split_once(']')) {
        Some((_, rest)) => rest.trim_start(),
        None => line,
    }
}

/// Parse `name: description` lines; names are matched against `expected`
/// case-insensitively. Returns one optional description per expected item.
pub fn parse_batch_response(response: &str, expected: &[(FeatureCategory, String)]) -> Vec<Option<String>> {
    let mut out = vec![None; expected.len()];
    for line in response.lines() {
        let Some((name, desc)) = strip_marker(line).split_once(':') else {
            continue;
        };
        let name = fold(name.trim().trim_matches(|c| matches!(c, '`' | '"' | '\'' | '*')));
        let desc = desc.trim();
        if name.is_empty() || desc.is_empty() {
            continue;
        }
        for (slot, (_, n)) in out.iter_mut().zip(expected) {
            if slot.is_none() && fold(n) == name {
                *slot = Some(desc.to_owned());
            }
        }
    }
    out
}

/// Describe `missing` with batched prompts of at most
/// [`FALLBACK_BATCH_SIZE`] features. Features absent from a batch answer
/// get one single-feature prompt each. Results are cached as `Llm`.
pub fn fallback_describe(
    missing: &[(FeatureCategory, String)],
    gateway: &Gateway,
    endpoint: &str,
    cache: &DescriptionCache,
) -> Result<FallbackOutcome, FallbackError> {
    if missing.is_empty() {
        return Err(FallbackError::EmptyRequest);
    }
    let mut outcome = FallbackOutcome::default();
    let mut undescribed = Vec::new();
    for batch in missing.chunks(FALLBACK_BATCH_SIZE) {
        let response = gateway.complete(endpoint, &render_fallback_batch_prompt(batch))?;
        outcome.batch_calls += 1;
        for ((category, name), desc) in batch.iter().zip(parse_batch_response(&response, batch)) {
            let desc = match desc {
                Some(d) => Some(d),
                None => {
                    outcome.single_calls += 1;
                    let text = gateway.complete(endpoint, &render_fallback_single_prompt(*category, name))?;
                    let text = text.trim();
                    (!text.is_empty()).then(|| text.to_owned())
                }
            };
            match desc {
                Some(d) => {
                    cache.put(CacheEntry::new(*category, name.clone(), d.clone(), CacheSource::Llm))?;
                    outcome.descriptions.push((*category, name.clone(), d));
                }
                None => undescribed.push(name.clone()),
            }
        }
    }
    if undescribed.is_empty() {
        Ok(outcome)
    } else {
        Err(FallbackError::IncompleteBatch(undescribed))
    }
}
