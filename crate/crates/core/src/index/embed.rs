//! Embedding providers and the local disk cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{EmbeddingVector, IndexError};
use crate::corpus::normalize_text;

/// A source of raw embedding values. Implementations return provider output
/// as-is; L2 normalization happens locally in [`embed_text`] /
/// [`embed_texts`].
pub trait Embedder: Send + Sync {
    /// Identifier recorded in index manifests and cache keys.
    fn model_id(&self) -> &str;

    /// The dimension every returned vector must have.
    fn dimension(&self) -> usize;

    /// Embeds a batch of texts, one raw vector per text, in order.
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError>;
}

/// Embeds one text: normalizes whitespace, calls the provider, checks the
/// configured dimension, and L2-normalizes the result.
pub fn embed_text(embedder: &dyn Embedder, text: &str) -> Result<EmbeddingVector, IndexError> {
    Ok(embed_texts(embedder, &[text])?.pop().expect("one vector per text"))
}

/// Batch variant of [`embed_text`].
pub fn embed_texts(
    embedder: &dyn Embedder,
    texts: &[&str],
) -> Result<Vec<EmbeddingVector>, IndexError> {
    let normalized: Vec<String> = texts.iter().map(|t| normalize_text(t)).collect();
    if normalized.iter().any(String::is_empty) {
        return Err(IndexError::EmptyText);
    }
    let raw = embedder.embed_raw(&normalized)?;
    if raw.len() != normalized.len() {
        return Err(IndexError::Provider {
            message: format!("provider returned {} vectors for {} texts", raw.len(), normalized.len()),
            retryable: false,
        });
    }
    raw.into_iter()
        .map(|values| {
            if values.len() != embedder.dimension() {
                return Err(IndexError::DimensionMismatch {
                    expected: embedder.dimension(),
                    actual: values.len(),
                });
            }
            EmbeddingVector::normalized(values)
        })
        .collect()
}

/// Deterministic offline embedder: each text's vector is drawn from a
/// ChaCha stream seeded by the text's SHA-256, so equal texts embed equally
/// on every platform without any provider.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension >= 1, "dimension must be >= 1");
        HashEmbedder { dimension }
    }
}

impl Embedder for HashEmbedder {
    fn model_id(&self) -> &str {
        "hash-embedder-v1"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError> {
        Ok(texts
            .iter()
            .map(|text| {
                let digest = Sha256::digest(text.as_bytes());
                let mut seed = [0u8; 32];
                seed.copy_from_slice(&digest);
                let mut rng = ChaCha8Rng::from_seed(seed);
                (0..self.dimension).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
            })
            .collect())
    }
}

/// OpenAI-compatible `/embeddings` client with bounded retries.
pub struct HttpEmbedder {
    endpoint: String,
    model_id: String,
    dimension: usize,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_attempts: u32,
    backoff_base: Duration,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingsDatum>,
}

#[derive(Deserialize)]
struct EmbeddingsDatum {
    index: usize,
    embedding: Vec<f32>,
}

impl HttpEmbedder {
    /// `api_key_env` names the environment variable holding the bearer token;
    /// unset means unauthenticated requests (local inference servers).
    pub fn new(
        endpoint: &str,
        model_id: &str,
        dimension: usize,
        api_key_env: Option<&str>,
    ) -> Self {
        let api_key = api_key_env.and_then(|var| std::env::var(var).ok());
        HttpEmbedder {
            endpoint: endpoint.to_string(),
            model_id: model_id.to_string(),
            dimension,
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("client builds"),
            max_attempts: 3,
            backoff_base: Duration::from_secs(1),
        }
    }

    fn request_once(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError> {
        let body = serde_json::json!({ "model": self.model_id, "input": texts });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| IndexError::Provider {
            message: format!("transport error: {e}"),
            retryable: true,
        })?;
        let status = resp.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            let text = resp.text().unwrap_or_default();
            return Err(IndexError::Provider {
                message: format!("status {status}: {text}"),
                retryable,
            });
        }
        let parsed: EmbeddingsResponse = resp.json().map_err(|e| IndexError::Provider {
            message: format!("malformed response body: {e}"),
            retryable: false,
        })?;
        let mut data = parsed.data;
        data.sort_by_key(|d| d.index);
        Ok(data.into_iter().map(|d| d.embedding).collect())
    }
}

impl Embedder for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError> {
        let mut delay = self.backoff_base;
        let mut last_err = None;
        for attempt in 0..self.max_attempts {
            match self.request_once(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(err) => {
                    let retryable = matches!(err, IndexError::Provider { retryable: true, .. });
                    last_err = Some(err);
                    if !retryable || attempt + 1 == self.max_attempts {
                        break;
                    }
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
        Err(last_err.expect("loop ran at least once"))
    }
}

/// Wraps another embedder with a content-addressed disk cache keyed by
/// (model id, SHA-256 of the normalized text). Repeat embeddings of the same
/// text hit the cache and never reach the inner provider.
pub struct CachingEmbedder<E> {
    inner: E,
    dir: PathBuf,
}

impl<E: Embedder> CachingEmbedder<E> {
    pub fn new(inner: E, dir: impl Into<PathBuf>) -> Self {
        CachingEmbedder { inner, dir: dir.into() }
    }

    fn cache_path(&self, text: &str) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(self.inner.model_id().as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        let key = crate::corpus::hex_string(&hasher.finalize());
        let (shard, rest) = key.split_at(2);
        self.dir.join(shard).join(format!("{rest}.json"))
    }

    fn read_cached(&self, path: &Path) -> Option<Vec<f32>> {
        let bytes = fs::read(path).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    fn write_cached(&self, path: &Path, values: &[f32]) -> Result<(), IndexError> {
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        serde_json::to_writer(&mut tmp, values).map_err(|e| {
            IndexError::Provider { message: format!("cache serialization: {e}"), retryable: false }
        })?;
        tmp.persist(path).map_err(|e| IndexError::Io(e.error))?;
        Ok(())
    }
}

impl<E: Embedder> Embedder for CachingEmbedder<E> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError> {
        let mut out: Vec<Option<Vec<f32>>> = Vec::with_capacity(texts.len());
        let mut missing: Vec<usize> = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            match self.read_cached(&self.cache_path(text)) {
                Some(values) => out.push(Some(values)),
                None => {
                    out.push(None);
                    missing.push(i);
                }
            }
        }
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let fresh = self.inner.embed_raw(&batch)?;
            if fresh.len() != batch.len() {
                return Err(IndexError::Provider {
                    message: format!(
                        "provider returned {} vectors for {} texts",
                        fresh.len(),
                        batch.len()
                    ),
                    retryable: false,
                });
            }
            for (&i, values) in missing.iter().zip(fresh) {
                self.write_cached(&self.cache_path(&texts[i]), &values)?;
                out[i] = Some(values);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("all slots filled")).collect())
    }
}
