//! Okapi BM25 over an in-memory term-frequency index.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{RankedList, RankerTag, RetrievalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Case-fold, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct SparseIndex {
    doc_ids: Vec<String>,
    positions: HashMap<String, usize>,
    term_freqs: Vec<HashMap<String, u32>>,
    doc_lens: Vec<usize>,
    avgdl: f64,
    doc_freqs: HashMap<String, usize>,
    params: Bm25Params,
}

impl SparseIndex {
    pub fn build<I, S, T>(docs: I, params: Bm25Params) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut idx = SparseIndex {
            doc_ids: Vec::new(),
            positions: HashMap::new(),
            term_freqs: Vec::new(),
            doc_lens: Vec::new(),
            avgdl: 0.0,
            doc_freqs: HashMap::new(),
            params,
        };
        for (id, text) in docs {
            let id = id.into();
            if idx.positions.contains_key(&id) {
                return Err(RetrievalError::DuplicateDocId(id));
            }
            let tokens = tokenize(text.as_ref());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *idx.doc_freqs.entry(t.clone()).or_default() += 1;
            }
            idx.positions.insert(id.clone(), idx.doc_ids.len());
            idx.doc_ids.push(id);
            idx.doc_lens.push(tokens.len());
            idx.term_freqs.push(tf);
        }
        if !idx.doc_lens.is_empty() {
            idx.avgdl = idx.doc_lens.iter().sum::<usize>() as f64 / idx.doc_lens.len() as f64;
        }
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freqs.get(term).copied().unwrap_or(0)
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<usize> {
        self.positions.get(doc_id).map(|&p| self.doc_lens[p])
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn score_at(&self, pos: usize, terms: &BTreeSet<String>) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = &self.term_freqs[pos];
        let len_ratio = if self.avgdl > 0.0 {
            self.doc_lens[pos] as f64 / self.avgdl
        } else {
            1.0
        };
        terms
            .iter()
            .filter_map(|t| tf.get(t).map(|&f| (t, f as f64)))
            .map(|(t, f)| self.idf(t) * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len_ratio)))
            .sum()
    }

    pub fn bm25_score(&self, query: &str, doc_id: &str) -> Result<f64, RetrievalError> {
        let pos = *self
            .positions
            .get(doc_id)
            .ok_or_else(|| RetrievalError::UnknownDocId(doc_id.to_owned()))?;
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        Ok(self.score_at(pos, &terms))
    }

    /// Documents sharing at least one term with the query, best first.
    pub fn search(&self, query: &str, top_n: usize) -> RankedList {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let scored = (0..self.len())
            .map(|p| (self.doc_ids[p].clone(), self.score_at(p, &terms)))
            .filter(|(_, s)| *s > 0.0);
        let mut list = RankedList::from_scores(RankerTag::Sparse, scored);
        list.truncate(top_n);
        list
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> SparseIndex {
        SparseIndex::build(
            [("d1", "sms message send"), ("d2", "camera photo"), ("d3", "send sms")],
            Bm25Params::default(),
        )
        .unwrap()
    }

    #[test]
    fn statistics() {
        let idx = three();
        assert_eq!(idx.len(), 3);
        assert!((idx.avgdl() - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(idx.doc_freq("sms"), 2);
        assert_eq!(idx.doc_freq("camera"), 1);
    }

    #[test]
    fn empty_and_duplicate() {
        let idx = SparseIndex::build(Vec::<(String, String)>::new(), Bm25Params::default()).unwrap();
        assert_eq!(idx.len(), 0);
        assert!(idx.search("x", 3).is_empty());
        assert!(matches!(
            SparseIndex::build([("a", "x"), ("a", "y")], Bm25Params::default()),
            Err(RetrievalError::DuplicateDocId(_))
        ));
    }

    #[test]
    fn unknown_doc() {
        assert!(matches!(
            three().bm25_score("sms", "d9"),
            Err(RetrievalError::UnknownDocId(_))
        ));
    }

    #[test]
    fn no_overlap_scores_zero() {
        let idx = three();
        for d in ["d1", "d2", "d3"] {
            assert_eq!(idx.bm25_score("zebra", d).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_doc_positive() {
        let idx = SparseIndex::build([("only", "wifi")], Bm25Params::default()).unwrap();
        assert!(idx.bm25_score("wifi", "only").unwrap() > 0.0);
    }

    #[test]
    fn tokenizer_splits_identifiers() {
        assert_eq!(
            tokenize("android.permission.SEND_SMS: Allows"),
            ["android", "permission", "send", "sms", "allows"]
        );
    }
}
