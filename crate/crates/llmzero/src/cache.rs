//! Content-addressed response cache: one JSON file per (model, prompt).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emodetect_core::backend::write_atomic;

use crate::ZeroShotError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub model_id: String,
    pub prompt_digest: String,
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_version: Option<String>,
    pub timestamp: String,
}

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Cache key over model id and prompt.
pub fn cache_key(model_id: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, model_id: &str, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.json", cache_key(model_id, prompt)))
    }

    /// A stored entry, if present and consistent with the request. Unreadable
    /// or mismatched files count as misses.
    pub fn get(&self, model_id: &str, prompt: &str) -> Option<CacheEntry> {
        let bytes = fs::read(self.path(model_id, prompt)).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        (entry.model_id == model_id && entry.prompt == prompt).then_some(entry)
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), ZeroShotError> {
        let path = self.path(&entry.model_id, &entry.prompt);
        let bytes = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        write_atomic(&path, &bytes).map_err(|e| ZeroShotError::Cache { path, source: e })
    }
}
