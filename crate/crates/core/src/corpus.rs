//! Knowledge corpus: one `name,description` CSV table per feature category.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::features::{fold, normalize_feature, FeatureCategory};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub category: FeatureCategory,
    pub name: String,
    pub description: String,
}

impl CorpusEntry {
    /// Text indexed by the retrievers.
    pub fn document_text(&self) -> String {
        format!("{}: {}", self.name, self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryTable {
    entries: Vec<CorpusEntry>,
    lookup: HashMap<String, usize>,
}

impl CategoryTable {
    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn get_folded(&self, folded: &str) -> Option<&CorpusEntry> {
        self.lookup.get(folded).map(|&i| &self.entries[i])
    }

    pub fn get(&self, name: &str) -> Option<&CorpusEntry> {
        self.get_folded(&fold(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnowledgeCorpus {
    tables: [CategoryTable; 4],
}

#[derive(Error, Debug)]
pub enum CorpusError {
    #[error("missing corpus file {0}")]
    MissingCategoryFile(String),
    #[error("duplicate {category} entry `{name}`")]
    DuplicateEntry { category: FeatureCategory, name: String },
    #[error("{file}: row {row} has an empty description")]
    EmptyDescription { file: String, row: usize },
    #[error("{file}: row {row} has an empty name")]
    EmptyName { file: String, row: usize },
    #[error("{file}: {reason}")]
    Malformed { file: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct Row {
    name: String,
    description: String,
}

fn slot(c: FeatureCategory) -> usize {
    match c {
        FeatureCategory::Permission => 0,
        FeatureCategory::Service => 1,
        FeatureCategory::Receiver => 2,
        FeatureCategory::IntentAction => 3,
    }
}

impl KnowledgeCorpus {
    pub fn table(&self, category: FeatureCategory) -> &CategoryTable {
        &self.tables[slot(category)]
    }

    /// Insert a validated entry. The name is normalized; duplicates under
    /// case-folding are rejected.
    pub fn insert(&mut self, category: FeatureCategory, name: &str, description: &str) -> Result<(), CorpusError> {
        let name = normalize_feature(name).map_err(|_| CorpusError::EmptyName {
            file: category.file_stem().into(),
            row: 0,
        })?;
        let description = description.trim();
        if description.is_empty() {
            return Err(CorpusError::EmptyDescription {
                file: category.file_stem().into(),
                row: 0,
            });
        }
        let table = &mut self.tables[slot(category)];
        let key = fold(&name);
        if table.lookup.contains_key(&key) {
            return Err(CorpusError::DuplicateEntry { category, name });
        }
        table.lookup.insert(key, table.entries.len());
        table.entries.push(CorpusEntry {
            category,
            name,
            description: description.to_owned(),
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tables.iter().map(|t| t.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn load_table(corpus: &mut KnowledgeCorpus, category: FeatureCategory, path: &Path) -> Result<(), CorpusError> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_path(path)
        .map_err(|e| CorpusError::Malformed {
            file: file.clone(),
            reason: e.to_string(),
        })?;
    let headers = rdr.headers().map_err(|e| CorpusError::Malformed {
        file: file.clone(),
        reason: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["name", "description"] {
        return Err(CorpusError::Malformed {
            file,
            reason: "header must be `name,description`".into(),
        });
    }
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        // header is row 1
        let row_no = i + 2;
        let row = row.map_err(|e| CorpusError::Malformed {
            file: file.clone(),
            reason: e.to_string(),
        })?;
        match corpus.insert(category, &row.name, &row.description) {
            Err(CorpusError::EmptyDescription { .. }) => {
                return Err(CorpusError::EmptyDescription { file, row: row_no })
            }
            Err(CorpusError::EmptyName { .. }) => return Err(CorpusError::EmptyName { file, row: row_no }),
            other => other?,
        }
    }
    Ok(())
}

/// Load `permissions.csv`, `services.csv`, `receivers.csv` and
/// `intent_actions.csv` from `dir`.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<KnowledgeCorpus, CorpusError> {
    let dir = dir.as_ref();
    let mut corpus = KnowledgeCorpus::default();
    for category in FeatureCategory::ALL {
        let path = dir.join(format!("{}.csv", category.file_stem()));
        if !path.is_file() {
            return Err(CorpusError::MissingCategoryFile(path.display().to_string()));
        }
        load_table(&mut corpus, category, &path)?;
    }
    Ok(corpus)
}

pub fn corpus_stats(corpus: &KnowledgeCorpus) -> BTreeMap<FeatureCategory, usize> {
    FeatureCategory::ALL
        .into_iter()
        .map(|c| (c, corpus.table(c).entries().len()))
        .collect()
}
