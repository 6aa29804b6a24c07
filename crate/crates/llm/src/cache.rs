use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{ChatEndpoint, ChatMessage, ChatReply, LlmError};

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    content: String,
}

/// Wraps an endpoint with an on-disk cache keyed by the SHA-256 of
/// `salt ++ messages`, so reruns with identical prompts replay recorded
/// replies. The salt should capture everything else that shapes a reply
/// (model, sampling parameters).
pub struct CachedEndpoint<E> {
    inner: E,
    dir: PathBuf,
    salt: String,
}

impl<E: ChatEndpoint> CachedEndpoint<E> {
    pub fn new(inner: E, dir: impl Into<PathBuf>, salt: impl Into<String>) -> Result<Self, LlmError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir, salt: salt.into() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(&self, messages: &[ChatMessage]) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.salt.as_bytes());
        hasher.update([0u8]);
        // serde_json output for these types is deterministic
        hasher.update(serde_json::to_vec(messages).expect("messages serialize"));
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }
}

impl<E: ChatEndpoint> ChatEndpoint for CachedEndpoint<E> {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, LlmError> {
        let key = self.key(messages);
        let path = self.path_for(&key);
        if let Ok(bytes) = fs::read(&path) {
            match serde_json::from_slice::<CacheEntry>(&bytes) {
                Ok(entry) => return Ok(ChatReply { content: entry.content, retries: 0 }),
                Err(e) => log::warn!("ignoring corrupt cache entry {}: {e}", path.display()),
            }
        }
        let reply = self.inner.chat(messages)?;
        let tmp = self.dir.join(format!("{key}.tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&CacheEntry { content: reply.content.clone() }).expect("entry serializes"))?;
        fs::rename(&tmp, &path)?;
        Ok(reply)
    }

    fn describe(&self) -> String {
        format!("cached({})", self.inner.describe())
    }
}
