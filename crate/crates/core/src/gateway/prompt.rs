//! Prompt templates and their rendering.
//!
//! Templates are data files under `templates/`; rendering substitutes
//! `{placeholder}` tokens verbatim and leaves every other byte unchanged.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{FeatureCategory, FeatureStats, StaticFeatureSet};

pub const AGENTIC_TEMPLATE: &str = include_str!("../../templates/agentic_rag.txt");
pub const GENERATOR_TEMPLATE: &str = include_str!("../../templates/generator.txt");
pub const FUSION_TEMPLATE: &str = include_str!("../../templates/fusion.txt");
pub const FALLBACK_BATCH_TEMPLATE: &str = include_str!("../../templates/fallback_batch.txt");
pub const FALLBACK_SINGLE_TEMPLATE: &str = include_str!("../../templates/fallback_single.txt");

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("template has no value for `{{{0}}}`")]
    MissingVariable(String),
    #[error("fusion prompt needs two non-empty descriptions")]
    EmptyInputDescription,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment<'t> {
    Literal(&'t str),
    Var(&'t str),
}

fn is_placeholder(inner: &str) -> bool {
    !inner.is_empty()
        && inner
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '[' | ']' | '\''))
}

fn segments(template: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    let mut literal_start = 0;
    let mut pos = 0;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_placeholder(&after[..close]) => {
                let abs_open = pos + open;
                if abs_open > literal_start {
                    out.push(Segment::Literal(&template[literal_start..abs_open]));
                }
                out.push(Segment::Var(&after[..close]));
                let consumed = open + 1 + close + 1;
                pos += consumed;
                literal_start = pos;
                rest = &rest[consumed..];
            }
            _ => {
                pos += open + 1;
                rest = &rest[open + 1..];
            }
        }
    }
    if literal_start < template.len() {
        out.push(Segment::Literal(&template[literal_start..]));
    }
    out
}

/// Placeholder names in order of appearance.
pub fn placeholders(template: &str) -> Vec<&str> {
    segments(template)
        .into_iter()
        .filter_map(|s| match s {
            Segment::Var(v) => Some(v),
            Segment::Literal(_) => None,
        })
        .collect()
}

/// Substitute every placeholder of `template` from `vars`.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    for seg in segments(template) {
        match seg {
            Segment::Literal(l) => out.push_str(l),
            Segment::Var(name) => {
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| PromptError::MissingVariable(name.to_owned()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

fn render_shipped(template: &str, vars: &[(&str, &str)]) -> String {
    render(template, vars).expect("shipped templates only use known placeholders")
}

/// Hex SHA-256 of a rendered prompt.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptContext {
    pub apk_name: String,
    pub stats: FeatureStats,
    pub formatted_info: String,
}

pub fn render_agentic_prompt(ctx: &PromptContext) -> String {
    let p = ctx.stats.total_permissions.to_string();
    let s = ctx.stats.total_services.to_string();
    let r = ctx.stats.total_receivers.to_string();
    let i = ctx.stats.total_intents.to_string();
    render_shipped(
        AGENTIC_TEMPLATE,
        &[
            ("apk_name", &ctx.apk_name),
            ("feature_stats['total_permissions']", &p),
            ("feature_stats['total_services']", &s),
            ("feature_stats['total_receivers']", &r),
            ("feature_stats['total_intents']", &i),
            ("formatted_info", &ctx.formatted_info),
        ],
    )
}

pub fn render_generator_prompt(formatted_info: &str) -> String {
    let block = if formatted_info.is_empty() {
        String::new()
    } else {
        format!("\n{formatted_info}\n")
    };
    render_shipped(GENERATOR_TEMPLATE, &[("formatted_info", &block)])
}

pub fn render_fusion_prompt(
    apk_name: &str,
    static_features_str: &str,
    description1: &str,
    description2: &str,
) -> Result<String, PromptError> {
    if description1.trim().is_empty() || description2.trim().is_empty() {
        return Err(PromptError::EmptyInputDescription);
    }
    Ok(render_shipped(
        FUSION_TEMPLATE,
        &[
            ("apk_name", apk_name),
            ("static_features_str", static_features_str),
            ("description1", description1),
            ("description2", description2),
        ],
    ))
}

/// Batched fallback prompt listing features as `N. [category] name`.
pub fn render_fallback_batch_prompt(features: &[(FeatureCategory, String)]) -> String {
    let list = features
        .iter()
        .enumerate()
        .map(|(i, (c, n))| format!("{}. [{}] {}", i + 1, c, n))
        .collect::<Vec<_>>()
        .join("\n");
    render_shipped(FALLBACK_BATCH_TEMPLATE, &[("feature_list", &list)])
}

pub fn render_fallback_single_prompt(category: FeatureCategory, name: &str) -> String {
    let cat = category.as_str().replace('_', " ");
    render_shipped(FALLBACK_SINGLE_TEMPLATE, &[("category", &cat), ("name", name)])
}

/// `Heading:` followed by `- name: description` lines, one block per
/// non-empty category in canonical order.
pub fn format_described_features<'a>(items: impl IntoIterator<Item = (FeatureCategory, &'a str, &'a str)>) -> String {
    let mut blocks: Vec<(FeatureCategory, Vec<String>)> = Vec::new();
    for (cat, name, desc) in items {
        let line = format!("- {name}: {desc}");
        match blocks.iter_mut().find(|(c, _)| *c == cat) {
            Some((_, lines)) => lines.push(line),
            None => blocks.push((cat, vec![line])),
        }
    }
    blocks.sort_by_key(|(c, _)| FeatureCategory::ALL.iter().position(|x| x == c));
    blocks
        .into_iter()
        .map(|(c, lines)| format!("{}:\n{}", c.heading(), lines.join("\n")))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Raw feature lists with counts, used when no descriptions are retrieved.
pub fn format_raw_features(set: &StaticFeatureSet) -> String {
    FeatureCategory::ALL
        .into_iter()
        .map(|c| {
            let items = set.get(c);
            let mut block = format!("{} ({}):", c.heading(), items.len());
            for n in items {
                block.push_str("\n- ");
                block.push_str(n);
            }
            block
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}
