//! Benchmark harness for pairwise scholarly-novelty judging.
//!
//! The library is organized around the lifecycle of an experiment:
//!
//! 1. [`corpus`] ingests arXiv-style metadata snapshots, builds the pair
//!    dataset (later-published paper is ground truth "more novel"), and
//!    samples per-field retrieval pools.
//! 2. [`index`] embeds abstracts, persists exact cosine indices, and serves
//!    top-k retrieval with a hard temporal cutoff.
//! 3. [`gateway`] provides uniform chat-completion access: HTTP providers,
//!    a scriptable mock, a disk response cache, retries, and rate limiting.
//! 4. [`strategies`] renders the prompt variants (zero-shot through
//!    retrieval-augmented), invokes the gateway, and parses verdicts.
//! 5. [`eval`] runs strategies over datasets with position-bias swapping,
//!    aggregates accuracy per cell, and computes McNemar significance.
//!
//! Data-parallel inner loops (retrieval scans, trial execution) run on rayon
//! when the default `parallel` feature is enabled and fall back to sequential
//! iteration otherwise; results are identical either way.

pub mod corpus;
pub mod eval;
pub mod gateway;
pub mod index;
pub mod parallel;
pub mod strategies;

pub use corpus::{CorpusStore, DatasetSpec, Field, PairSample, PaperRecord};
pub use eval::{EvalReport, EvalRunner, TrialLedger, TrialRecord};
pub use gateway::{ChatRequest, ChatResponse, Gateway};
pub use index::{EmbeddingVector, Index, RetrievalResult};
pub use strategies::{PresentationOrder, SlotWinner, StrategyId, Verdict};
