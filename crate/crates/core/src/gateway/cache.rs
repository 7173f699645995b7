//! Append-only JSONL response cache.
//!
//! Every raw model response is persisted so an experiment can be
//! re-analyzed bit-exactly without re-querying a nondeterministic
//! backend. The file is only ever appended to; on load, later entries
//! win for a repeated key (the values are identical for deterministic
//! backends anyway). A torn or hand-mangled line is skipped and
//! counted, not fatal — losing one cache entry costs a re-query, while
//! refusing to load costs the whole cache.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// One cached exchange. `request_digest_inputs_hash` fingerprints the
/// request fields that fed the key, as an audit trail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request_digest_inputs_hash: String,
    pub raw_text: String,
    pub model: String,
    pub timestamp: String,
}

#[derive(Debug)]
pub struct ResponseCache {
    path: PathBuf,
    entries: HashMap<String, CacheEntry>,
    skipped_lines: usize,
}

impl ResponseCache {
    /// Opens (or creates) the cache file and loads existing entries.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        let mut skipped_lines = 0;
        match File::open(&path) {
            Ok(file) => {
                for line in BufReader::new(file).lines() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<CacheEntry>(&line) {
                        Ok(entry) => {
                            entries.insert(entry.key.clone(), entry);
                        }
                        Err(_) => skipped_lines += 1,
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
            }
            Err(e) => return Err(e),
        }
        Ok(ResponseCache {
            path,
            entries,
            skipped_lines,
        })
    }

    pub fn get(&self, key: &str) -> Option<&CacheEntry> {
        self.entries.get(key)
    }

    /// Appends the entry to the file and the in-memory index.
    pub fn put(&mut self, entry: CacheEntry) -> std::io::Result<()> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(&entry).expect("cache entry serializes");
        writeln!(file, "{line}")?;
        file.flush()?;
        self.entries.insert(entry.key.clone(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Malformed lines encountered at load time.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(key: &str, text: &str) -> CacheEntry {
        CacheEntry {
            key: key.to_string(),
            request_digest_inputs_hash: format!("digest-{key}"),
            raw_text: text.to_string(),
            model: "test-model".to_string(),
            timestamp: "2024-01-01T00:00:00Z".to_string(),
        }
    }

    #[test]
    fn round_trips_through_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = ResponseCache::open(&path).unwrap();
            cache.put(entry("k1", "Functional")).unwrap();
            cache.put(entry("k2", "neither")).unwrap();
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("k1").unwrap().raw_text, "Functional");
        assert_eq!(cache.get("k2").unwrap().raw_text, "neither");
        assert_eq!(cache.get("missing"), None);
    }

    #[test]
    fn appends_rather_than_rewrites() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = ResponseCache::open(&path).unwrap();
        cache.put(entry("k1", "a")).unwrap();
        let size_one = std::fs::metadata(&path).unwrap().len();
        cache.put(entry("k2", "b")).unwrap();
        let size_two = std::fs::metadata(&path).unwrap().len();
        assert!(size_two > size_one);
        // First line unchanged: pure append.
        let content = std::fs::read_to_string(&path).unwrap();
        let first = content.lines().next().unwrap();
        assert!(first.contains("\"k1\""));
    }

    #[test]
    fn later_entries_win_for_a_repeated_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = ResponseCache::open(&path).unwrap();
            cache.put(entry("k1", "old")).unwrap();
            cache.put(entry("k1", "new")).unwrap();
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.get("k1").unwrap().raw_text, "new");
    }

    #[test]
    fn torn_lines_are_skipped_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = ResponseCache::open(&path).unwrap();
            cache.put(entry("k1", "kept")).unwrap();
        }
        // Simulate a crash mid-append.
        let mut file = OpenOptions::new().append(true).open(&path).unwrap();
        write!(file, "{{\"key\": \"k2\", \"raw_te").unwrap();
        drop(file);

        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.skipped_lines(), 1);
        assert!(cache.get("k1").is_some());
    }

    #[test]
    fn missing_file_starts_empty() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path().join("fresh/cache.jsonl")).unwrap();
        assert!(cache.is_empty());
    }
}
