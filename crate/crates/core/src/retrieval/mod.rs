//! Per-category ensemble retrieval: BM25 and dense cosine rankers combined
//! with weighted Reciprocal Rank Fusion, anchored by the matcher.

pub mod dense;
pub mod embed;
pub mod fusion;
pub mod sparse;

use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

use crate::corpus::{CorpusEntry, KnowledgeCorpus};
use crate::features::FeatureCategory;
use crate::matcher::{match_feature, MatchResult, MatcherConfig};

pub use dense::DenseIndex;
pub use embed::{Embedder, HashedTrigramEmbedder, RemoteEmbedder, RemoteEmbedderConfig};
pub use fusion::{rrf_fuse, EnsembleConfig, FusedRanking};
pub use sparse::{Bm25Params, SparseIndex};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("unknown document id `{0}`")]
    UnknownDocId(String),
    #[error("vector dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector for `{doc_id}` has norm {norm}, expected 1")]
    NotUnitNorm { doc_id: String, norm: f64 },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("{lists} ranked lists but {weights} weights")]
    WeightCountMismatch { lists: usize, weights: usize },
    #[error("embedder transport: {0}")]
    Transport(String),
    #[error("invalid ensemble config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankerTag {
    Sparse,
    Dense,
}

/// Descending score, ties by ascending id.
pub(crate) fn sort_scored(items: &mut [(String, f64)]) {
    items.sort_by(|(da, sa), (db, sb)| match sb.total_cmp(sa) {
        Ordering::Equal => da.cmp(db),
        o => o,
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    ranker: RankerTag,
    items: Vec<(String, f64)>,
}

impl RankedList {
    /// Sort arbitrary scored documents into ranking order.
    pub fn from_scores(ranker: RankerTag, scored: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut items: Vec<(String, f64)> = scored.into_iter().collect();
        sort_scored(&mut items);
        // keep each doc's best score
        let mut seen = std::collections::HashSet::new();
        items.retain(|(d, _)| seen.insert(d.clone()));
        Self { ranker, items }
    }

    pub fn ranker(&self) -> RankerTag {
        self.ranker
    }

    pub fn items(&self) -> &[(String, f64)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.items.truncate(n);
    }
}

/// Sparse and dense indexes over one category's corpus entries. Document
/// ids are the canonical entry names; text is `name: description`.
#[derive(Debug, Clone)]
pub struct CategoryIndex {
    pub sparse: SparseIndex,
    pub dense: DenseIndex,
}

#[derive(Clone)]
pub struct RetrievalIndexes {
    per_category: Vec<(FeatureCategory, CategoryIndex)>,
    embedder: Arc<dyn Embedder>,
    bm25: Bm25Params,
}

impl std::fmt::Debug for RetrievalIndexes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RetrievalIndexes")
            .field("embedder", &self.embedder.id())
            .field("categories", &self.per_category.len())
            .finish()
    }
}

impl RetrievalIndexes {
    pub fn build(
        corpus: &KnowledgeCorpus,
        embedder: Arc<dyn Embedder>,
        bm25: Bm25Params,
    ) -> Result<Self, RetrievalError> {
        let mut per_category = Vec::with_capacity(4);
        for category in FeatureCategory::ALL {
            let docs: Vec<(String, String)> = corpus
                .table(category)
                .entries()
                .iter()
                .map(|e| (e.name.clone(), e.document_text()))
                .collect();
            let sparse = SparseIndex::build(docs.iter().map(|(i, t)| (i.clone(), t.as_str())), bm25)?;
            let dense = DenseIndex::build(docs.iter().map(|(i, t)| (i.clone(), t.as_str())), embedder.as_ref())?;
            per_category.push((category, CategoryIndex { sparse, dense }));
        }
        Ok(Self {
            per_category,
            embedder,
            bm25,
        })
    }

    pub fn category(&self, category: FeatureCategory) -> &CategoryIndex {
        &self
            .per_category
            .iter()
            .find(|(c, _)| *c == category)
            .expect("all four categories are indexed")
            .1
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn bm25_params(&self) -> Bm25Params {
        self.bm25
    }

    /// Fuse the sparse and dense rankings for `query` within a category.
    pub fn ensemble_search(
        &self,
        category: FeatureCategory,
        query: &str,
        cfg: &EnsembleConfig,
    ) -> Result<FusedRanking, RetrievalError> {
        let idx = self.category(category);
        let sparse = idx.sparse.search(query, cfg.top_n);
        let dense = match self.embedder.embed(query) {
            Ok(v) => idx.dense.search(&v, cfg.top_n)?,
            Err(RetrievalError::EmptyText) => RankedList::from_scores(RankerTag::Dense, []),
            Err(e) => return Err(e),
        };
        rrf_fuse(&[sparse, dense], &cfg.weights(), cfg.rrf_k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Retrieval<'c> {
    /// Anchor entry first, then fused neighbours, at most `top_n` entries.
    Retrieved {
        anchor: MatchResult<'c>,
        entries: Vec<&'c CorpusEntry>,
    },
    Miss,
}

impl<'c> Retrieval<'c> {
    pub fn anchor_entry(&self) -> Option<&'c CorpusEntry> {
        match self {
            Retrieval::Retrieved { entries, .. } => entries.first().copied(),
            Retrieval::Miss => None,
        }
    }
}

pub fn retrieve_description<'c>(
    feature: &str,
    category: FeatureCategory,
    corpus: &'c KnowledgeCorpus,
    indexes: &RetrievalIndexes,
    matcher_cfg: &MatcherConfig,
    ensemble_cfg: &EnsembleConfig,
) -> Result<Retrieval<'c>, RetrievalError> {
    let anchor = match_feature(feature, category, corpus, matcher_cfg);
    let Some(anchor_entry) = anchor.entry() else {
        return Ok(Retrieval::Miss);
    };
    let fused = indexes.ensemble_search(category, feature, ensemble_cfg)?;
    let table = corpus.table(category);
    let mut entries = vec![anchor_entry];
    for id in fused.doc_ids() {
        if entries.len() >= ensemble_cfg.top_n {
            break;
        }
        if let Some(e) = table.get(id) {
            if !entries.iter().any(|x| x.name == e.name) {
                entries.push(e);
            }
        }
    }
    Ok(Retrieval::Retrieved { anchor, entries })
}
