//! Persistent response cache: one JSONL file keyed by prompt hash, loaded
//! fully at startup, appended on insert. Corrupt lines are skipped with a
//! warning. Within one process: concurrent reads, serialized writes, exactly
//! one retained entry per hash.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::ClientError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt_hash: String,
    pub response_text: String,
    /// Unix seconds at insertion time.
    pub created_at: u64,
    pub model_name: String,
}

impl CacheEntry {
    pub fn new(prompt_hash: String, response_text: String, model_name: String) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            prompt_hash,
            response_text,
            created_at,
            model_name,
        }
    }
}

pub struct CacheStore {
    entries: RwLock<HashMap<String, CacheEntry>>,
    appender: Option<Mutex<File>>,
}

impl CacheStore {
    /// Opens (or creates) the cache file and loads every valid entry.
    /// Duplicate hashes in the file keep the first occurrence.
    pub fn open(path: &Path) -> Result<Self, ClientError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (number, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(entry) => {
                        entries.entry(entry.prompt_hash.clone()).or_insert(entry);
                    }
                    Err(e) => {
                        log::warn!(
                            "skipping corrupt cache line {} in {}: {e}",
                            number + 1,
                            path.display()
                        );
                    }
                }
            }
        }
        let appender = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            entries: RwLock::new(entries),
            appender: Some(Mutex::new(appender)),
        })
    }

    /// A cache with no backing file; entries live only in memory.
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            appender: None,
        }
    }

    pub fn get(&self, prompt_hash: &str) -> Option<CacheEntry> {
        self.entries
            .read()
            .expect("cache lock")
            .get(prompt_hash)
            .cloned()
    }

    /// Inserts unless the hash is already present (first entry wins).
    /// Returns true when the entry was newly stored.
    pub fn insert(&self, entry: CacheEntry) -> bool {
        let mut entries = self.entries.write().expect("cache lock");
        if entries.contains_key(&entry.prompt_hash) {
            return false;
        }
        if let Some(appender) = &self.appender {
            let line = serde_json::to_string(&entry).expect("cache entry serialization");
            let mut file = appender.lock().expect("cache appender lock");
            if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.write_all(b"\n")) {
                log::warn!("failed to append cache entry: {e}");
            }
        }
        entries.insert(entry.prompt_hash.clone(), entry);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
