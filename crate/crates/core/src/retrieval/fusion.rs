//! Weighted Reciprocal Rank Fusion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{sort_scored, RankedList, RetrievalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "half")]
    pub weight_sparse: f64,
    #[serde(default = "half")]
    pub weight_dense: f64,
    #[serde(default = "default_rrf_k")]
    pub rrf_k: u32,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
}

fn half() -> f64 {
    0.5
}
fn default_rrf_k() -> u32 {
    60
}
fn default_top_n() -> usize {
    3
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            weight_sparse: 0.5,
            weight_dense: 0.5,
            rrf_k: 60,
            top_n: 3,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        let ok = self.weight_sparse >= 0.0
            && self.weight_dense >= 0.0
            && ((self.weight_sparse + self.weight_dense) - 1.0).abs() <= 1e-9
            && self.rrf_k > 0
            && self.top_n > 0;
        if ok {
            Ok(())
        } else {
            Err(RetrievalError::InvalidConfig(format!(
                "weights must be non-negative and sum to 1, rrf_k and top_n positive: {self:?}"
            )))
        }
    }

    /// Weights aligned with `[sparse, dense]` input lists.
    pub fn weights(&self) -> [f64; 2] {
        [self.weight_sparse, self.weight_dense]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedRanking {
    items: Vec<(String, f64)>,
}

impl FusedRanking {
    pub fn items(&self) -> &[(String, f64)] {
        &self.items
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(d, _)| d.as_str())
    }

    pub fn score(&self, doc_id: &str) -> Option<f64> {
        self.items.iter().find(|(d, _)| d == doc_id).map(|(_, s)| *s)
    }
}

/// `score(d) = Σ_i w_i / (k + rank_i(d))` with 1-based ranks; a list that
/// does not contain `d` contributes nothing.
pub fn rrf_fuse(lists: &[RankedList], weights: &[f64], rrf_k: u32) -> Result<FusedRanking, RetrievalError> {
    if lists.len() != weights.len() {
        return Err(RetrievalError::WeightCountMismatch {
            lists: lists.len(),
            weights: weights.len(),
        });
    }
    let k = f64::from(rrf_k);
    let mut scores: HashMap<&str, f64> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (list, w) in lists.iter().zip(weights) {
        for (rank0, (doc, _)) in list.items().iter().enumerate() {
            let contribution = w / (k + (rank0 + 1) as f64);
            match scores.get_mut(doc.as_str()) {
                Some(s) => *s += contribution,
                None => {
                    scores.insert(doc, contribution);
                    order.push(doc);
                }
            }
        }
    }
    let mut items: Vec<(String, f64)> = order.into_iter().map(|d| (d.to_owned(), scores[d])).collect();
    sort_scored(&mut items);
    Ok(FusedRanking { items })
}
