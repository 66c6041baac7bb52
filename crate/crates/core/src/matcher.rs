//! Two-stage feature identification: exact lookup, then Levenshtein
//! similarity against every entry of the category.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusEntry, KnowledgeCorpus};
use crate::features::{fold, FeatureCategory};

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatcherConfig {
    #[serde(default = "default_threshold")]
    pub fuzzy_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_FUZZY_THRESHOLD
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
#[error("fuzzy threshold {0} is outside [0, 1]")]
pub struct InvalidThreshold(pub f64);

impl MatcherConfig {
    pub fn new(fuzzy_threshold: f64) -> Result<Self, InvalidThreshold> {
        let cfg = Self { fuzzy_threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), InvalidThreshold> {
        if (0.0..=1.0).contains(&self.fuzzy_threshold) {
            Ok(())
        } else {
            Err(InvalidThreshold(self.fuzzy_threshold))
        }
    }
}

/// Edit distance with unit insert/delete/substitute costs over Unicode
/// scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // single row over the shorter string
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(lc != sc);
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + cost);
            diag = above;
        }
    }
    row[short.len()]
}

#[derive(Error, Debug, Clone, Copy, PartialEq, Eq)]
#[error("similarity of two empty strings is undefined")]
pub struct BothEmpty;

/// `1 - lev(fold a, fold b) / max(|fold a|, |fold b|)`.
pub fn similarity(a: &str, b: &str) -> Result<f64, BothEmpty> {
    let a: Vec<char> = fold(a).chars().collect();
    let b: Vec<char> = fold(b).chars().collect();
    similarity_folded(&a, &b)
}

fn similarity_folded(a: &[char], b: &[char]) -> Result<f64, BothEmpty> {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return Err(BothEmpty);
    }
    Ok(1.0 - levenshtein_chars(a, b) as f64 / longest as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchOutcome<'c> {
    Exact(&'c CorpusEntry),
    Fuzzy { entry: &'c CorpusEntry, similarity: f64 },
    Miss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<'c> {
    pub query: String,
    pub outcome: MatchOutcome<'c>,
}

impl<'c> MatchResult<'c> {
    pub fn entry(&self) -> Option<&'c CorpusEntry> {
        match self.outcome {
            MatchOutcome::Exact(e) | MatchOutcome::Fuzzy { entry: e, .. } => Some(e),
            MatchOutcome::Miss => None,
        }
    }
}

/// Best fuzzy candidate in a category regardless of threshold; ties go to
/// the lexicographically smallest name.
pub fn best_candidate<'c>(
    query: &str,
    category: FeatureCategory,
    corpus: &'c KnowledgeCorpus,
) -> Option<(&'c CorpusEntry, f64)> {
    let q: Vec<char> = fold(query).chars().collect();
    let mut best: Option<(&CorpusEntry, f64)> = None;
    for entry in corpus.table(category).entries() {
        let name: Vec<char> = fold(&entry.name).chars().collect();
        let Ok(sim) = similarity_folded(&q, &name) else {
            continue;
        };
        best = match best {
            Some((b, s)) if s > sim || (s == sim && b.name <= entry.name) => Some((b, s)),
            _ => Some((entry, sim)),
        };
    }
    best
}

pub fn match_feature<'c>(
    query: &str,
    category: FeatureCategory,
    corpus: &'c KnowledgeCorpus,
    cfg: &MatcherConfig,
) -> MatchResult<'c> {
    let table = corpus.table(category);
    let outcome = if let Some(entry) = table.get(query) {
        MatchOutcome::Exact(entry)
    } else {
        match best_candidate(query, category, corpus) {
            Some((entry, similarity)) if similarity >= cfg.fuzzy_threshold => MatchOutcome::Fuzzy { entry, similarity },
            _ => MatchOutcome::Miss,
        }
    };
    MatchResult {
        query: query.to_owned(),
        outcome,
    }
}
