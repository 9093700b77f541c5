//! Persistent, content-addressed cache of caption results.
//!
//! Re-runs and ablations that reuse a (frame, instruction, decode params)
//! triple never re-pay inference. Keys hash a canonical length-prefixed
//! serialization of every field that can change the caption; entries are one
//! small JSON file each, sharded two levels deep by digest prefix, written
//! via temp-file-then-rename so readers never observe torn entries.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::DecodeParams;

/// Hex SHA-256 of a byte string.
pub fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First 8 hex digits of the content digest; the short form used in mock
/// responses and log lines.
pub fn short_digest(bytes: &[u8]) -> String {
    hex_digest(bytes)[..8].to_string()
}

/// Content-addressed cache key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub digest: String,
}

/// Everything that determines a caption, in fixed canonical order.
#[derive(Debug, Clone)]
pub struct CaptionKeyFields<'a> {
    pub captioner_model_id: &'a str,
    pub video_id: &'a str,
    pub frame_source_index: usize,
    pub instruction: &'a str,
    pub decode: DecodeParams,
    pub image_digest: &'a str,
}

/// Derives the deterministic cache key for one caption request.
///
/// Canonical serialization is a length-prefixed concatenation of the fields
/// in declaration order; absent optionals serialize as zero-length fields, so
/// `top_p = 0.7` and `top_p` absent never collide.
pub fn make_key(fields: &CaptionKeyFields<'_>) -> CacheKey {
    let mut buf = Vec::new();
    let mut push = |bytes: &[u8]| {
        buf.extend_from_slice(&(bytes.len() as u64).to_be_bytes());
        buf.extend_from_slice(bytes);
    };
    push(fields.captioner_model_id.as_bytes());
    push(fields.video_id.as_bytes());
    push(&(fields.frame_source_index as u64).to_be_bytes());
    push(fields.instruction.as_bytes());
    push(&u64::from(fields.decode.max_new_tokens).to_be_bytes());
    match fields.decode.top_p {
        Some(p) => push(&p.to_be_bytes()),
        None => push(&[]),
    }
    match fields.decode.seed {
        Some(s) => push(&s.to_be_bytes()),
        None => push(&[]),
    }
    push(fields.image_digest.as_bytes());
    CacheKey {
        digest: hex_digest(&buf),
    }
}

/// One cached caption; immutable once written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub caption_text: String,
    pub truncated: bool,
    pub created_at: chrono::DateTime<chrono::Utc>,
    pub pipeline_version: String,
}

/// Filesystem-backed caption cache rooted at one directory.
///
/// Safe for concurrent readers and writers across threads and processes;
/// concurrent puts of the same key leave exactly one durable entry
/// (last-writer-wins via atomic rename).
#[derive(Debug, Clone)]
pub struct CaptionCache {
    root: PathBuf,
}

impl CaptionCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, key: &CacheKey) -> PathBuf {
        // two-level sharding keeps directories small and entries inspectable
        self.root
            .join(&key.digest[0..2])
            .join(&key.digest[2..4])
            .join(format!("{}.json", key.digest))
    }

    /// Looks a key up; `Ok(None)` is a miss.
    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::Storage(format!("{}: {e}", path.display()))),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Storage(format!("corrupt cache entry {}: {e}", path.display())))?;
        Ok(Some(entry))
    }

    /// Stores an entry atomically. The entry's key must match `key`.
    pub fn put(&self, key: &CacheKey, entry: &CacheEntry) -> Result<()> {
        if entry.key != *key {
            return Err(Error::Storage(format!(
                "entry key {} does not match put key {}",
                entry.key.digest, key.digest
            )));
        }
        let path = self.entry_path(key);
        let dir = path.parent().expect("entry path has a parent");
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Storage(format!("{}: {e}", dir.display())))?;
        let json = serde_json::to_vec(entry)
            .map_err(|e| Error::Storage(format!("serialize cache entry: {e}")))?;
        let tmp = tempfile::NamedTempFile::new_in(dir)
            .map_err(|e| Error::Storage(format!("{}: {e}", dir.display())))?;
        std::fs::write(tmp.path(), &json)
            .map_err(|e| Error::Storage(format!("{}: {e}", tmp.path().display())))?;
        tmp.persist(&path)
            .map_err(|e| Error::Storage(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}
