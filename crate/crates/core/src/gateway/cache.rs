//! Content-addressed disk cache for chat responses.
//!
//! Layout (versioned as `v1`): `<root>/v1/<first two key hex chars>/<rest>.json`,
//! one JSON document per response. Writes go through a temp file and an
//! atomic rename, so concurrent writers of the same key converge on one
//! complete value and readers never observe partial files.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::GatewayError;

const LAYOUT_VERSION: &str = "v1";

/// The persisted form of a provider response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Provider round-trips the original call took.
    pub attempts: u32,
}

#[derive(Debug)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    fn path_for(&self, key: &str) -> PathBuf {
        let (shard, rest) = key.split_at(2);
        self.root.join(LAYOUT_VERSION).join(shard).join(format!("{rest}.json"))
    }

    /// Returns the stored response for `key`, or `None` on miss. An
    /// unreadable or corrupt entry is treated as a miss so one damaged file
    /// cannot wedge a run.
    pub fn get(&self, key: &str) -> Option<CachedResponse> {
        let bytes = fs::read(self.path_for(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put(&self, key: &str, response: &CachedResponse) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        serde_json::to_writer(&mut tmp, response)
            .map_err(|e| GatewayError::Cache(format!("serialize cached response: {e}")))?;
        tmp.persist(&path).map_err(|e| GatewayError::Io(e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CachedResponse {
        CachedResponse {
            text: "Paper X".into(),
            prompt_tokens: 120,
            completion_tokens: 3,
            attempts: 2,
        }
    }

    #[test]
    fn round_trips_byte_equal_text() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let key = "ab".to_string() + &"cd".repeat(31);
        assert_eq!(cache.get(&key), None);
        cache.put(&key, &sample()).unwrap();
        assert_eq!(cache.get(&key), Some(sample()));
    }

    #[test]
    fn survives_reopening_the_directory() {
        let dir = tempfile::tempdir().unwrap();
        let key = "ffee".to_string() + &"00".repeat(30);
        ResponseCache::new(dir.path()).put(&key, &sample()).unwrap();
        let reopened = ResponseCache::new(dir.path());
        assert_eq!(reopened.get(&key), Some(sample()));
    }

    #[test]
    fn corrupt_entries_read_as_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let key = "aa".to_string() + &"bb".repeat(31);
        cache.put(&key, &sample()).unwrap();
        let path = dir.path().join("v1").join("aa").join(format!("{}.json", &key[2..]));
        fs::write(&path, b"{truncated").unwrap();
        assert_eq!(cache.get(&key), None);
    }
}
