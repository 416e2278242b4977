//! Corpus ingestion and benchmark dataset construction.
//!
//! Papers come in as newline-delimited metadata records (the public arXiv
//! snapshot layout), get normalized into [`PaperRecord`]s keyed by
//! (field, year), and are then sampled into the pair dataset — for every
//! (field, start_year, year_gap) cell, `samples_per_cell` pairs where the
//! later-published paper is the ground-truth label — plus per-field retrieval
//! pools.

mod ingest;
mod sample;

pub use ingest::{ingest_metadata, load_store, save_records, IngestStats};
pub use sample::{sample_dataset, sample_index_pool, PoolWarning};

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Errors from ingestion and sampling.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error reading corpus source: {0}")]
    Io(#[from] io::Error),
    #[error("malformed store record at line {line}: {message}")]
    MalformedStore { line: usize, message: String },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error(
        "cell (field={field}, start_year={start_year}, gap={year_gap}) is underpopulated: \
         year {year} has {available} papers, need {needed}"
    )]
    CellUnderpopulated {
        field: Field,
        start_year: i32,
        year_gap: i32,
        year: i32,
        available: usize,
        needed: usize,
    },
    #[error("record {id} is invalid: {message}")]
    InvalidRecord { id: String, message: String },
}

/// The six top-level arXiv fields the benchmark covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "cs")]
    Cs,
    #[serde(rename = "math")]
    Math,
    #[serde(rename = "physics")]
    Physics,
    #[serde(rename = "q-bio")]
    QBio,
    #[serde(rename = "q-fin")]
    QFin,
    #[serde(rename = "stat")]
    Stat,
}

impl Field {
    /// All six fields in canonical order.
    pub const ALL: [Field; 6] = [
        Field::Cs,
        Field::Math,
        Field::Physics,
        Field::QBio,
        Field::QFin,
        Field::Stat,
    ];

    /// Maps a category token like `cs.CL` to its top-level field.
    /// Tokens outside the six covered fields map to `None`.
    pub fn from_category(category: &str) -> Option<Field> {
        let prefix = category.split('.').next().unwrap_or(category).trim();
        Field::parse(prefix)
    }

    /// Parses the canonical short name (`cs`, `math`, `physics`, `q-bio`,
    /// `q-fin`, `stat`).
    pub fn parse(name: &str) -> Option<Field> {
        match name {
            "cs" => Some(Field::Cs),
            "math" => Some(Field::Math),
            "physics" => Some(Field::Physics),
            "q-bio" => Some(Field::QBio),
            "q-fin" => Some(Field::QFin),
            "stat" => Some(Field::Stat),
            _ => None,
        }
    }

    /// Canonical short name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Field::Cs => "cs",
            Field::Math => "math",
            Field::Physics => "physics",
            Field::QBio => "q-bio",
            Field::QFin => "q-fin",
            Field::Stat => "stat",
        }
    }

    /// Human-readable name, used when a prompt needs the field spelled out.
    pub fn display_name(&self) -> &'static str {
        match self {
            Field::Cs => "Computer Science",
            Field::Math => "Mathematics",
            Field::Physics => "Physics",
            Field::QBio => "Quantitative Biology",
            Field::QFin => "Quantitative Finance",
            Field::Stat => "Statistics",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Collapses internal whitespace and trims the ends.
///
/// Applied to titles, abstracts, and TLDRs at ingest time so downstream
/// hashing and embedding see a stable form.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One scholarly paper: identifier, title, abstract, field, publication date,
/// and optional metadata used by the ablation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub field: Field,
    pub published_date: NaiveDate,
    pub published_year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tldr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliation: Option<String>,
}

impl PaperRecord {
    /// Builds a record, normalizing text fields and enforcing the invariants:
    /// non-empty abstract and `published_year` matching the date.
    pub fn new(
        id: impl Into<String>,
        title: &str,
        abstract_text: &str,
        field: Field,
        published_date: NaiveDate,
    ) -> Result<PaperRecord, CorpusError> {
        let id = id.into();
        let abstract_text = normalize_text(abstract_text);
        if abstract_text.is_empty() {
            return Err(CorpusError::InvalidRecord {
                id,
                message: "abstract is empty after normalization".into(),
            });
        }
        Ok(PaperRecord {
            id,
            title: normalize_text(title),
            abstract_text,
            field,
            published_year: published_date.year(),
            published_date,
            authors: None,
            tldr: None,
            affiliation: None,
        })
    }

    pub fn with_authors(mut self, authors: Vec<String>) -> Self {
        self.authors = Some(authors);
        self
    }

    pub fn with_tldr(mut self, tldr: &str) -> Self {
        self.tldr = Some(normalize_text(tldr));
        self
    }

    pub fn with_affiliation(mut self, affiliation: &str) -> Self {
        self.affiliation = Some(normalize_text(affiliation));
        self
    }
}

/// One benchmark tuple: a (newer, older) paper pair within a field, labeled
/// with the later paper's id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub field: Field,
    pub start_year: i32,
    pub year_gap: i32,
    /// The later-published paper (published in `start_year`).
    pub paper_x: PaperRecord,
    /// The earlier-published paper (published in `start_year - year_gap`).
    pub paper_y: PaperRecord,
    /// Id of the ground-truth more-novel paper; always `paper_x.id`.
    pub label: String,
}

impl PairSample {
    /// A compact identifier for ledger keys: `field/start/gap/x/y`.
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}",
            self.field, self.start_year, self.year_gap, self.paper_x.id, self.paper_y.id
        )
    }
}

/// Parameters of the pair-dataset construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub fields: Vec<Field>,
    pub start_years: Vec<i32>,
    pub year_gaps: Vec<i32>,
    pub samples_per_cell: usize,
    pub rng_seed: u64,
}

impl Default for DatasetSpec {
    /// The full benchmark grid: six fields, start years 2019-2023, gaps
    /// 2/4/6/8/10, 100 pairs per cell — 15000 pairs in total.
    fn default() -> Self {
        DatasetSpec {
            fields: Field::ALL.to_vec(),
            start_years: (2019..=2023).collect(),
            year_gaps: vec![2, 4, 6, 8, 10],
            samples_per_cell: 100,
            rng_seed: 0,
        }
    }
}

impl DatasetSpec {
    /// Total pairs this grid will produce.
    pub fn total_pairs(&self) -> usize {
        self.fields.len() * self.start_years.len() * self.year_gaps.len() * self.samples_per_cell
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.fields.is_empty() || self.start_years.is_empty() || self.year_gaps.is_empty() {
            return Err(CorpusError::InvalidSpec(
                "fields, start_years and year_gaps must be non-empty".into(),
            ));
        }
        if self.samples_per_cell < 1 {
            return Err(CorpusError::InvalidSpec("samples_per_cell must be >= 1".into()));
        }
        if let Some(gap) = self.year_gaps.iter().find(|g| **g < 1) {
            return Err(CorpusError::InvalidSpec(format!("year gap {gap} must be >= 1")));
        }
        Ok(())
    }
}

/// Immutable store of normalized records bucketed by (field, year).
///
/// Built once by ingestion; afterwards it is only read, so it is safe to
/// share across any number of concurrent readers.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct CorpusStore {
    by_cell: BTreeMap<(Field, i32), Vec<PaperRecord>>,
    len: usize,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a record into its (field, year) bucket, keeping the bucket
    /// sorted by id so downstream sampling is order-independent.
    pub fn insert(&mut self, record: PaperRecord) {
        let bucket = self
            .by_cell
            .entry((record.field, record.published_year))
            .or_default();
        let pos = bucket
            .binary_search_by(|r| r.id.cmp(&record.id))
            .unwrap_or_else(|p| p);
        bucket.insert(pos, record);
        self.len += 1;
    }

    /// Records for one (field, year) bucket, sorted by id.
    pub fn bucket(&self, field: Field, year: i32) -> &[PaperRecord] {
        self.by_cell
            .get(&(field, year))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Iterates all records in deterministic (field, year, id) order.
    pub fn records(&self) -> impl Iterator<Item = &PaperRecord> {
        self.by_cell.values().flat_map(|bucket| bucket.iter())
    }

    /// Content digest over the canonical serialization; equal stores have
    /// equal digests regardless of insertion order.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for record in self.records() {
            let line = serde_json::to_string(record).expect("record serializes");
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hex_string(&hasher.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        write!(out, "{b:02x}").expect("write to string");
    }
    out
}
