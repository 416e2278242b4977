//! Index construction and on-disk persistence.
//!
//! An index directory holds `manifest.json` (format version, embedding model,
//! dimension, field, entry count) and `entries.bin`, a little-endian binary
//! stream: the magic bytes `NVIX`, a `u32` format version, then per entry a
//! `u32` id length, the id bytes, an `i32` publication date in days since
//! 1970-01-01, and `dimension` `f32` vector components. Save/load round-trips
//! bit-exactly; the loader rejects any mismatch between manifest and entries.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{date_from_days, days_since_epoch, embed_texts, Embedder, EmbeddingVector, IndexError};
use crate::corpus::{Field, PaperRecord};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: [u8; 4] = *b"NVIX";
const MANIFEST_FILE: &str = "manifest.json";
const ENTRIES_FILE: &str = "entries.bin";
const EMBED_BATCH: usize = 64;

/// One indexed paper: id, normalized abstract embedding, publication date.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub paper_id: String,
    pub vector: EmbeddingVector,
    pub published_date: NaiveDate,
    pub field: Field,
}

/// Index provenance and shape, persisted alongside the entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub model_id: String,
    pub dimension: usize,
    pub field: Field,
    pub entry_count: usize,
}

/// An immutable per-field retrieval index.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    manifest: IndexManifest,
    entries: Vec<IndexEntry>,
}

impl Index {
    /// Assembles an index from already-embedded entries, enforcing id
    /// uniqueness, a single field, and a uniform dimension. Entries are kept
    /// sorted by id.
    pub fn from_entries(
        model_id: &str,
        field: Field,
        mut entries: Vec<IndexEntry>,
    ) -> Result<Index, IndexError> {
        if entries.is_empty() {
            return Err(IndexError::EmptyPool);
        }
        let dimension = entries[0].vector.dimension();
        for entry in &entries {
            if entry.field != field {
                return Err(IndexError::MixedFields {
                    expected: field.to_string(),
                    found: entry.field.to_string(),
                    id: entry.paper_id.clone(),
                });
            }
            if entry.vector.dimension() != dimension {
                return Err(IndexError::DimensionMismatch {
                    expected: dimension,
                    actual: entry.vector.dimension(),
                });
            }
        }
        entries.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
        if let Some(pair) = entries.windows(2).find(|w| w[0].paper_id == w[1].paper_id) {
            return Err(IndexError::DuplicateId(pair[0].paper_id.clone()));
        }
        Ok(Index {
            manifest: IndexManifest {
                format_version: FORMAT_VERSION,
                model_id: model_id.to_string(),
                dimension,
                field,
                entry_count: entries.len(),
            },
            entries,
        })
    }

    pub fn manifest(&self) -> &IndexManifest {
        &self.manifest
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `manifest.json` and `entries.bin` into `dir` (created if
    /// absent).
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir)?;
        let manifest_json = serde_json::to_vec_pretty(&self.manifest)
            .map_err(|e| IndexError::CorruptIndex(format!("manifest serialization: {e}")))?;
        fs::write(dir.join(MANIFEST_FILE), manifest_json)?;
        let mut w = BufWriter::new(fs::File::create(dir.join(ENTRIES_FILE))?);
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for entry in &self.entries {
            let id = entry.paper_id.as_bytes();
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id)?;
            let days = days_since_epoch(entry.published_date) as i32;
            w.write_all(&days.to_le_bytes())?;
            for &x in entry.vector.values() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads an index directory, verifying magic, format version, dimension,
    /// and entry count against the manifest.
    pub fn load(dir: &Path) -> Result<Index, IndexError> {
        let manifest_bytes = fs::read(dir.join(MANIFEST_FILE))?;
        let manifest: IndexManifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| IndexError::CorruptIndex(format!("manifest parse: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(IndexError::ManifestMismatch(format!(
                "format version {} unsupported (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let mut r = BufReader::new(fs::File::open(dir.join(ENTRIES_FILE))?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(IndexError::CorruptIndex("bad magic bytes".into()));
        }
        let mut version = [0u8; 4];
        r.read_exact(&mut version)?;
        if u32::from_le_bytes(version) != FORMAT_VERSION {
            return Err(IndexError::ManifestMismatch(format!(
                "entries file version {} != manifest version {}",
                u32::from_le_bytes(version),
                manifest.format_version
            )));
        }
        let mut entries = Vec::with_capacity(manifest.entry_count);
        for _ in 0..manifest.entry_count {
            let mut len_buf = [0u8; 4];
            r.read_exact(&mut len_buf).map_err(|_| {
                IndexError::ManifestMismatch(format!(
                    "entries file ended before {} entries",
                    manifest.entry_count
                ))
            })?;
            let id_len = u32::from_le_bytes(len_buf) as usize;
            let mut id_buf = vec![0u8; id_len];
            r.read_exact(&mut id_buf)?;
            let paper_id = String::from_utf8(id_buf)
                .map_err(|_| IndexError::CorruptIndex("entry id is not utf-8".into()))?;
            let mut date_buf = [0u8; 4];
            r.read_exact(&mut date_buf)?;
            let published_date = date_from_days(i32::from_le_bytes(date_buf) as i64);
            let mut values = Vec::with_capacity(manifest.dimension);
            let mut f_buf = [0u8; 4];
            for _ in 0..manifest.dimension {
                r.read_exact(&mut f_buf)?;
                values.push(f32::from_le_bytes(f_buf));
            }
            entries.push(IndexEntry {
                paper_id,
                vector: EmbeddingVector::new(values)?,
                published_date,
                field: manifest.field,
            });
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(IndexError::ManifestMismatch(
                "entries file holds more entries than the manifest declares".into(),
            ));
        }
        Index::from_entries(&manifest.model_id, manifest.field, entries)
    }
}

/// Embeds a paper pool and assembles the index. The pool must be non-empty
/// and single-field; papers whose abstracts fail to embed after the
/// provider's retries abort the build, listed by id.
pub fn build_index(pool: &[PaperRecord], embedder: &dyn Embedder) -> Result<Index, IndexError> {
    let field = pool.first().ok_or(IndexError::EmptyPool)?.field;
    if let Some(stray) = pool.iter().find(|p| p.field != field) {
        return Err(IndexError::MixedFields {
            expected: field.to_string(),
            found: stray.field.to_string(),
            id: stray.id.clone(),
        });
    }
    let mut entries = Vec::with_capacity(pool.len());
    let mut failed_ids = Vec::new();
    let mut first_error = None;
    for chunk in pool.chunks(EMBED_BATCH) {
        let texts: Vec<&str> = chunk.iter().map(|p| p.abstract_text.as_str()).collect();
        match embed_texts(embedder, &texts) {
            Ok(vectors) => {
                for (paper, vector) in chunk.iter().zip(vectors) {
                    entries.push(IndexEntry {
                        paper_id: paper.id.clone(),
                        vector,
                        published_date: paper.published_date,
                        field: paper.field,
                    });
                }
            }
            Err(err) => {
                failed_ids.extend(chunk.iter().map(|p| p.id.clone()));
                first_error.get_or_insert(err);
            }
        }
    }
    if !failed_ids.is_empty() {
        return Err(IndexError::EmbedFailed {
            failed_ids,
            message: first_error.expect("failure recorded").to_string(),
        });
    }
    Index::from_entries(embedder.model_id(), field, entries)
}
