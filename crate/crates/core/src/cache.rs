//! Description cache backed by an append-only JSON Lines log.
//!
//! Keys are `(category, case-folded name)`; the stored name keeps its
//! canonical case. Reads take a shared lock, writes go through a single
//! writer lock that appends to the log before updating the map.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{fold, FeatureCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheSource {
    Corpus,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub category: FeatureCategory,
    pub name: String,
    pub description: String,
    pub source: CacheSource,
    pub created_at: u64,
}

pub fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl CacheEntry {
    pub fn new(
        category: FeatureCategory,
        name: impl Into<String>,
        description: impl Into<String>,
        source: CacheSource,
    ) -> Self {
        Self {
            category,
            name: name.into(),
            description: description.into(),
            source,
            created_at: now_secs(),
        }
    }

    fn key(&self) -> (FeatureCategory, String) {
        (self.category, fold(&self.name))
    }
}

#[derive(Error, Debug)]
pub enum CacheError {
    #[error("cache entry `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("cache entry has an empty name")]
    EmptyName,
    #[error("cache persistence: {0}")]
    Persistence(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub inserts: u64,
    pub entries: usize,
}

/// A corrupt log line skipped during replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct DescriptionCache {
    map: RwLock<HashMap<(FeatureCategory, String), CacheEntry>>,
    log: Mutex<Option<BufWriter<File>>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
    inserts: AtomicU64,
}

impl DescriptionCache {
    /// Cache without a persistence log.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replay the log at `path` (a missing file is an empty cache) and open
    /// it for appending. Corrupt lines are skipped and reported.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<CorruptLine>), CacheError> {
        let path = path.as_ref();
        let mut map = HashMap::new();
        let mut corrupt = Vec::new();
        match File::open(path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<CacheEntry>(&line) {
                        Ok(e) if !e.description.trim().is_empty() && !e.name.is_empty() => {
                            map.insert(e.key(), e);
                        }
                        Ok(_) => corrupt.push(CorruptLine {
                            line: i + 1,
                            reason: "empty name or description".into(),
                        }),
                        Err(err) => corrupt.push(CorruptLine {
                            line: i + 1,
                            reason: err.to_string(),
                        }),
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        for c in &corrupt {
            tracing::warn!(stage = "cache", line = c.line, reason = %c.reason, "skipping corrupt cache line");
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let cache = Self {
            map: RwLock::new(map),
            log: Mutex::new(Some(BufWriter::new(file))),
            path: Some(path.to_owned()),
            ..Default::default()
        };
        Ok((cache, corrupt))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, category: FeatureCategory, name: &str) -> Option<CacheEntry> {
        let found = self
            .map
            .read()
            .expect("cache lock poisoned")
            .get(&(category, fold(name)))
            .cloned();
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    /// Last-write-wins upsert, appended to the log before it becomes visible.
    pub fn put(&self, entry: CacheEntry) -> Result<(), CacheError> {
        if entry.name.trim().is_empty() {
            return Err(CacheError::EmptyName);
        }
        if entry.description.trim().is_empty() {
            return Err(CacheError::EmptyDescription(entry.name));
        }
        let mut log = self.log.lock().expect("cache log poisoned");
        if let Some(w) = log.as_mut() {
            serde_json::to_writer(&mut *w, &entry).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.map
            .write()
            .expect("cache lock poisoned")
            .insert(entry.key(), entry);
        self.inserts.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            inserts: self.inserts.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }

    /// All entries sorted by key, for inspection and comparisons.
    pub fn dump(&self) -> Vec<CacheEntry> {
        let mut v: Vec<CacheEntry> = self
            .map
            .read()
            .expect("cache lock poisoned")
            .values()
            .cloned()
            .collect();
        v.sort_by_key(|a| a.key());
        v
    }

    pub fn sync(&self) -> Result<(), CacheError> {
        if let Some(w) = self.log.lock().expect("cache log poisoned").as_mut() {
            w.flush()?;
            w.get_ref().sync_data()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(name: &str, desc: &str) -> CacheEntry {
        CacheEntry::new(FeatureCategory::Permission, name, desc, CacheSource::Corpus)
    }

    #[test]
    fn round_trip_and_counters() {
        let c = DescriptionCache::in_memory();
        assert!(c.get(FeatureCategory::Permission, "a.B").is_none());
        c.put(entry("a.B", "one")).unwrap();
        assert_eq!(c.get(FeatureCategory::Permission, "A.b").unwrap().description, "one");
        assert!(c.get(FeatureCategory::Service, "a.B").is_none());
        let s = c.stats();
        assert_eq!((s.hits, s.misses, s.inserts), (1, 2, 1));
    }

    #[test]
    fn last_write_wins() {
        let c = DescriptionCache::in_memory();
        c.put(entry("x", "first")).unwrap();
        c.put(entry("X", "second")).unwrap();
        let got = c.get(FeatureCategory::Permission, "x").unwrap();
        assert_eq!(got.description, "second");
        assert_eq!(got.name, "X");
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn empty_description_rejected() {
        let c = DescriptionCache::in_memory();
        assert!(matches!(c.put(entry("x", "  ")), Err(CacheError::EmptyDescription(_))));
    }

    #[test]
    fn survives_reload() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("cache.jsonl");
        {
            let (c, _) = DescriptionCache::load(&p).unwrap();
            c.put(entry("a.B", "kept")).unwrap();
        }
        let (c, corrupt) = DescriptionCache::load(&p).unwrap();
        assert!(corrupt.is_empty());
        assert_eq!(c.get(FeatureCategory::Permission, "a.b").unwrap().description, "kept");
    }

    #[test]
    fn missing_file_is_empty() {
        let d = tempfile::tempdir().unwrap();
        let (c, corrupt) = DescriptionCache::load(d.path().join("nope.jsonl")).unwrap();
        assert!(c.is_empty() && corrupt.is_empty());
    }

    #[test]
    fn replay_later_wins_and_skips_corrupt() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("cache.jsonl");
        let a = serde_json::to_string(&entry("k", "old")).unwrap();
        let b = serde_json::to_string(&entry("K", "new")).unwrap();
        let other = serde_json::to_string(&entry("z", "zz")).unwrap();
        std::fs::write(&p, format!("{a}\n{{not json\n{b}\n{other}\n")).unwrap();
        let (c, corrupt) = DescriptionCache::load(&p).unwrap();
        assert_eq!(corrupt.len(), 1);
        assert_eq!(corrupt[0].line, 2);
        assert_eq!(c.len(), 2);
        assert_eq!(c.get(FeatureCategory::Permission, "k").unwrap().description, "new");
    }

    #[test]
    fn handle_is_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<DescriptionCache>();
    }
}
