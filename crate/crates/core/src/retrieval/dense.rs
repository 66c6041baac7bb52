//! Exact cosine search over unit vectors.

use super::embed::{dot, Embedder};
use super::{RankedList, RankerTag, RetrievalError};

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DenseIndex {
    embedder_id: String,
    dim: usize,
    docs: Vec<(String, Vec<f64>)>,
}

impl DenseIndex {
    /// Index precomputed vectors. Each must have dimension `dim` and unit
    /// L2 norm.
    pub fn from_vectors(
        embedder_id: impl Into<String>,
        dim: usize,
        docs: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, RetrievalError> {
        let mut seen = std::collections::HashSet::new();
        for (id, v) in &docs {
            if !seen.insert(id.as_str()) {
                return Err(RetrievalError::DuplicateDocId(id.clone()));
            }
            if v.len() != dim {
                return Err(RetrievalError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            let norm = dot(v, v).sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(RetrievalError::NotUnitNorm {
                    doc_id: id.clone(),
                    norm,
                });
            }
        }
        Ok(Self {
            embedder_id: embedder_id.into(),
            dim,
            docs,
        })
    }

    pub fn build<I, S, T>(docs: I, embedder: &dyn Embedder) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let vectors = docs
            .into_iter()
            .map(|(id, text)| Ok((id.into(), embedder.embed(text.as_ref())?)))
            .collect::<Result<Vec<_>, RetrievalError>>()?;
        Self::from_vectors(embedder.id(), embedder.dim(), vectors)
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vectors(&self) -> &[(String, Vec<f64>)] {
        &self.docs
    }

    pub fn search(&self, query: &[f64], top_n: usize) -> Result<RankedList, RetrievalError> {
        if query.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let scored = self.docs.iter().map(|(id, v)| (id.clone(), dot(query, v)));
        let mut list = RankedList::from_scores(RankerTag::Dense, scored);
        list.truncate(top_n);
        Ok(list)
    }
}
