//! Embedding index: exact cosine top-k retrieval under a temporal cutoff.
//!
//! Abstracts are embedded (remotely or via the offline hash embedder), stored
//! L2-normalized in a per-field [`Index`], persisted in a versioned binary
//! layout, and queried with a brute-force scan that filters by publication
//! date before ranking. Retrieval also reports the aggregate statistics
//! (average cosine score, average published date) the retrieval-augmented
//! judging prompt consumes.

mod embed;
mod retrieval;
mod store;

pub use embed::{
    embed_text, embed_texts, CachingEmbedder, Embedder, HashEmbedder, HttpEmbedder,
};
pub use retrieval::{
    aggregates, pair_cutoff, retrieve_topk, retrieve_topk_sequential, RetrievalHit,
    RetrievalResult, DEFAULT_TOP_K,
};
pub use store::{build_index, Index, IndexEntry, IndexManifest, FORMAT_VERSION};

use std::io;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from embedding, index persistence, and retrieval.
#[derive(Debug, Error)]
pub enum IndexError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("embedding provider error: {message}")]
    Provider { message: String, retryable: bool },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding vector contains a non-finite value")]
    NonFinite,
    #[error("embedding vector has zero norm, cannot normalize")]
    ZeroNorm,
    #[error("index pool is empty")]
    EmptyPool,
    #[error("duplicate paper id in index: {0}")]
    DuplicateId(String),
    #[error("index pool mixes fields: expected {expected}, found {found} on {id}")]
    MixedFields {
        expected: String,
        found: String,
        id: String,
    },
    #[error("embedding failed for {} paper(s) [{}]: {message}", failed_ids.len(), failed_ids.join(", "))]
    EmbedFailed {
        failed_ids: Vec<String>,
        message: String,
    },
    #[error("corrupt index data: {0}")]
    CorruptIndex(String),
    #[error("index manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("top-k must be at least 1")]
    InvalidK,
}

/// A fixed-dimension embedding; all entries finite.
///
/// Vectors stored in an index are additionally L2-normalized (see
/// [`EmbeddingVector::normalized`]), so cosine similarity between stored
/// vectors reduces to a dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Wraps raw values, rejecting NaN and infinities.
    pub fn new(values: Vec<f32>) -> Result<Self, IndexError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }

    /// Wraps raw values and L2-normalizes them, regardless of whether the
    /// provider already normalized.
    pub fn normalized(values: Vec<f32>) -> Result<Self, IndexError> {
        let v = EmbeddingVector::new(values)?;
        let norm = v.norm();
        if norm == 0.0 {
            return Err(IndexError::ZeroNorm);
        }
        Ok(EmbeddingVector(
            v.0.into_iter().map(|x| (x as f64 / norm) as f32).collect(),
        ))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    /// L2 norm, accumulated in f64.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&x| x as f64 * x as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Dot product, accumulated in f64 in component order.
    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64, IndexError> {
        if self.dimension() != other.dimension() {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension(),
                actual: other.dimension(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum())
    }
}

/// Cosine similarity `dot(u,v) / (‖u‖·‖v‖)`, clamped to [-1, 1].
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, IndexError> {
    let dot = u.dot(v)?;
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return Err(IndexError::ZeroNorm);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => unreachable!(),
};

/// Days since 1970-01-01 (negative before it).
pub fn days_since_epoch(date: NaiveDate) -> i64 {
    (date - EPOCH).num_days()
}

/// Inverse of [`days_since_epoch`].
pub fn date_from_days(days: i64) -> NaiveDate {
    EPOCH + chrono::Duration::days(days)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec2(a: f32, b: f32) -> EmbeddingVector {
        EmbeddingVector::new(vec![a, b]).unwrap()
    }

    #[test]
    fn cosine_identity_is_one() {
        let v = EmbeddingVector::normalized(vec![0.3, -0.2, 0.9]).unwrap();
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_orthogonal_is_zero() {
        assert_eq!(cosine_similarity(&vec2(1.0, 0.0), &vec2(0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_computed() {
        let sim = cosine_similarity(&vec2(0.6, 0.8), &vec2(1.0, 0.0)).unwrap();
        assert!((sim - 0.6).abs() < 1e-6);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        let u = vec2(1.0, 0.0);
        let v = EmbeddingVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            cosine_similarity(&u, &v),
            Err(IndexError::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn normalization_produces_unit_norm() {
        let v = EmbeddingVector::normalized(vec![3.0, 4.0]).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-6);
        assert!((v.values()[0] - 0.6).abs() < 1e-6);
        assert!((v.values()[1] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn non_finite_and_zero_vectors_are_rejected() {
        assert!(matches!(
            EmbeddingVector::new(vec![f32::NAN]),
            Err(IndexError::NonFinite)
        ));
        assert!(matches!(
            EmbeddingVector::normalized(vec![0.0, 0.0]),
            Err(IndexError::ZeroNorm)
        ));
    }

    #[test]
    fn epoch_day_round_trip() {
        for (y, m, d) in [(1970, 1, 1), (2020, 1, 1), (2023, 12, 31), (1969, 12, 31)] {
            let date = NaiveDate::from_ymd_opt(y, m, d).unwrap();
            assert_eq!(date_from_days(days_since_epoch(date)), date);
        }
        assert_eq!(days_since_epoch(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()), 0);
        assert_eq!(days_since_epoch(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()), 18262);
    }
}
