//! Evaluation runs: position-bias-swapped trials, an append-only trial
//! ledger, accuracy aggregation, and McNemar significance.
//!
//! Every pair is judged twice per strategy — once with the older paper in
//! the first slot, once with the newer — and each completed trial is
//! persisted before the run moves on, so an interrupted run resumes from the
//! ledger without repeating provider calls.

mod aggregate;
mod matrix;
mod mcnemar;
mod report;

pub use aggregate::{
    aggregate, filter_trials, CellRow, EvalReport, FieldRow, GapRow, OrderTally,
    SignificanceEntry,
};
pub use matrix::{run_matrix, AblationSpec, AffiliationSwap, MatrixOptions};
pub use mcnemar::{
    mcnemar, mcnemar_counts, significance_between, McnemarMethod, McnemarResult,
    MCNEMAR_EXACT_LIMIT,
};
pub use report::{
    cell_table_csv, field_table_csv, gap_field_curve_csv, gap_start_year_curve_csv,
    gap_table_csv, significance_table_csv,
};

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Field, PairSample};
use crate::gateway::Gateway;
use crate::index::{Embedder, Index};
use crate::parallel;
use crate::strategies::{
    judge_llm_discussion, judge_pointwise, judge_rag_novelty, judge_self_consistency,
    judge_single, DiscussionTurn, Exemplar, JudgeContext, MetadataOptions, PresentationOrder,
    SlotWinner, StrategyId, Verdict, SELF_CONSISTENCY_PATHS, SELF_CONSISTENCY_TEMPERATURE,
};

/// Errors from evaluation runs and ledger handling.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("trial ledger line {line} is corrupt: {message}")]
    CorruptLedger { line: usize, message: String },
    #[error("cannot aggregate an empty trial set")]
    EmptyTrials,
    #[error("trial sets mix runs: {details}")]
    MixedTrials { details: String },
    #[error("trial sets cover different (pair, order) keys ({left} vs {right} trials)")]
    TrialKeyMismatch { left: usize, right: usize },
    #[error("strategy {strategy} needs {what} configured on the runner")]
    MissingResources {
        strategy: StrategyId,
        what: &'static str,
    },
}

/// Identifies the pair a trial judged, without carrying full records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRef {
    pub field: Field,
    pub start_year: i32,
    pub year_gap: i32,
    pub paper_x_id: String,
    pub paper_y_id: String,
    /// Ground truth: the id of the later-published paper.
    pub label: String,
}

impl PairRef {
    pub fn from_pair(pair: &PairSample) -> PairRef {
        PairRef {
            field: pair.field,
            start_year: pair.start_year,
            year_gap: pair.year_gap,
            paper_x_id: pair.paper_x.id.clone(),
            paper_y_id: pair.paper_y.id.clone(),
            label: pair.label.clone(),
        }
    }

    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}",
            self.field.as_str(),
            self.start_year,
            self.year_gap,
            self.paper_x_id,
            self.paper_y_id
        )
    }
}

/// One persisted judging trial: a (pair, strategy, variant, order) cell of
/// the run grid plus its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub pair_ref: PairRef,
    pub strategy_id: StrategyId,
    /// Run-variant tag: metadata ablation label, affiliation sub-run, etc.
    pub variant: String,
    pub order: PresentationOrder,
    pub verdict: Verdict,
    /// True iff the verdict names the later-published paper. Unparsed and
    /// errored trials are always incorrect.
    pub correct: bool,
    pub provider_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_retrieval: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<DiscussionTurn>>,
    pub timestamp: String,
}

impl TrialRecord {
    /// Unique resume key: one trial per (strategy, variant, pair, order).
    pub fn trial_key(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.strategy_id,
            self.variant,
            self.pair_ref.key(),
            self.order
        )
    }
}

/// Append-only newline-delimited ledger of completed trials.
///
/// Each record is one JSON line, flushed on append, so a crash loses at most
/// the line being written; [`TrialLedger::load`] ignores a torn final line
/// and rejects corruption anywhere else.
pub struct TrialLedger {
    path: PathBuf,
    write_lock: Mutex<()>,
}

impl TrialLedger {
    pub fn new(path: impl Into<PathBuf>) -> TrialLedger {
        TrialLedger { path: path.into(), write_lock: Mutex::new(()) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &TrialRecord) -> Result<(), EvalError> {
        let line = serde_json::to_string(record)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let _guard = self.write_lock.lock().expect("ledger lock poisoned");
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(line.as_bytes())?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }

    /// Loads every complete record in append order. A missing file is an
    /// empty ledger.
    pub fn load(&self) -> Result<Vec<TrialRecord>, EvalError> {
        let text = match std::fs::read_to_string(&self.path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .collect();
        let mut records = Vec::with_capacity(lines.len());
        for (position, &(line_number, line)) in lines.iter().enumerate() {
            match serde_json::from_str::<TrialRecord>(line) {
                Ok(record) => records.push(record),
                Err(e) if position == lines.len() - 1 => {
                    let _ = e;
                    break;
                }
                Err(e) => {
                    return Err(EvalError::CorruptLedger {
                        line: line_number + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(records)
    }
}

/// Index and embedder backing the retrieval-augmented strategy.
pub struct RagResources<'a> {
    pub index: &'a Index,
    pub embedder: &'a dyn Embedder,
    pub k: usize,
}

/// Counts from one [`EvalRunner::run_dataset`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub executed: u64,
    pub skipped: u64,
    pub errored: u64,
}

/// Executes trials against a gateway, persisting each to the ledger and
/// skipping trials a previous run already completed.
pub struct EvalRunner<'a> {
    gateway: &'a Gateway,
    model_id: String,
    exemplars: Option<Vec<Exemplar>>,
    rag: Option<RagResources<'a>>,
    ledger: TrialLedger,
    completed: Mutex<HashMap<String, TrialRecord>>,
}

impl<'a> EvalRunner<'a> {
    /// Opens (or creates) the ledger at `ledger_path` and indexes its
    /// completed trials for resume.
    pub fn new(
        gateway: &'a Gateway,
        model_id: impl Into<String>,
        ledger_path: impl Into<PathBuf>,
    ) -> Result<Self, EvalError> {
        let ledger = TrialLedger::new(ledger_path);
        let mut completed = HashMap::new();
        for record in ledger.load()? {
            completed.entry(record.trial_key()).or_insert(record);
        }
        Ok(EvalRunner {
            gateway,
            model_id: model_id.into(),
            exemplars: None,
            rag: None,
            ledger,
            completed: Mutex::new(completed),
        })
    }

    /// Worked examples for the two-shot strategy.
    pub fn with_exemplars(mut self, exemplars: Vec<Exemplar>) -> Self {
        self.exemplars = Some(exemplars);
        self
    }

    /// Retrieval resources for the retrieval-augmented strategy.
    pub fn with_rag(mut self, rag: RagResources<'a>) -> Self {
        self.rag = Some(rag);
        self
    }

    pub fn ledger(&self) -> &TrialLedger {
        &self.ledger
    }

    /// Snapshot of all completed trials, ordered by trial key.
    pub fn trials(&self) -> Vec<TrialRecord> {
        let completed = self.completed.lock().expect("runner lock poisoned");
        let mut trials: Vec<TrialRecord> = completed.values().cloned().collect();
        trials.sort_by_key(TrialRecord::trial_key);
        trials
    }

    fn check_resources(&self, strategy: StrategyId) -> Result<(), EvalError> {
        match strategy {
            StrategyId::TwoShot if self.exemplars.is_none() => {
                Err(EvalError::MissingResources { strategy, what: "exemplars" })
            }
            StrategyId::RagNovelty if self.rag.is_none() => {
                Err(EvalError::MissingResources { strategy, what: "a retrieval index" })
            }
            _ => Ok(()),
        }
    }

    /// Judges `pair` under both presentation orders, persisting each trial
    /// before returning. Trials found in the ledger are returned as-is, not
    /// re-executed; a strategy error becomes a recorded trial, not a run
    /// failure.
    pub fn run_pair(
        &self,
        strategy: StrategyId,
        pair: &PairSample,
        variant: &str,
        metadata: MetadataOptions,
    ) -> Result<(TrialRecord, TrialRecord), EvalError> {
        self.check_resources(strategy)?;
        let (asc, _) = self.run_trial(strategy, pair, PresentationOrder::AscYear, variant, metadata)?;
        let (desc, _) =
            self.run_trial(strategy, pair, PresentationOrder::DescYear, variant, metadata)?;
        Ok((asc, desc))
    }

    /// Runs the full dataset for one strategy and variant, in parallel when
    /// the `parallel` feature is on. Returns how many trials were executed,
    /// resumed from the ledger, and recorded as errored.
    pub fn run_dataset(
        &self,
        strategy: StrategyId,
        pairs: &[PairSample],
        variant: &str,
        metadata: MetadataOptions,
    ) -> Result<RunSummary, EvalError> {
        self.check_resources(strategy)?;
        let executed = AtomicU64::new(0);
        let skipped = AtomicU64::new(0);
        let errored = AtomicU64::new(0);
        let outcomes = parallel::map_collect(pairs, |pair| -> Result<(), EvalError> {
            for order in PresentationOrder::BOTH {
                let (record, ran) = self.run_trial(strategy, pair, order, variant, metadata)?;
                if ran {
                    executed.fetch_add(1, Ordering::Relaxed);
                    if record.error.is_some() {
                        errored.fetch_add(1, Ordering::Relaxed);
                    }
                } else {
                    skipped.fetch_add(1, Ordering::Relaxed);
                }
            }
            Ok(())
        });
        for outcome in outcomes {
            outcome?;
        }
        Ok(RunSummary {
            executed: executed.into_inner(),
            skipped: skipped.into_inner(),
            errored: errored.into_inner(),
        })
    }

    /// Executes one trial unless the ledger already holds it. The returned
    /// flag is true when the trial ran in this call.
    fn run_trial(
        &self,
        strategy: StrategyId,
        pair: &PairSample,
        order: PresentationOrder,
        variant: &str,
        metadata: MetadataOptions,
    ) -> Result<(TrialRecord, bool), EvalError> {
        let key = format!("{strategy}|{variant}|{}|{order}", pair.key());
        if let Some(record) = self.completed.lock().expect("runner lock poisoned").get(&key) {
            return Ok((record.clone(), false));
        }
        let record = self.execute_trial(strategy, pair, order, variant, metadata);
        self.ledger.append(&record)?;
        self.completed
            .lock()
            .expect("runner lock poisoned")
            .entry(key)
            .or_insert_with(|| record.clone());
        Ok((record, true))
    }

    fn execute_trial(
        &self,
        strategy: StrategyId,
        pair: &PairSample,
        order: PresentationOrder,
        variant: &str,
        metadata: MetadataOptions,
    ) -> TrialRecord {
        let ctx = JudgeContext {
            gateway: self.gateway,
            model_id: self.model_id.clone(),
            metadata,
            exemplars: self.exemplars.clone(),
        };
        let mut empty_retrieval = false;
        let mut transcript = None;
        let outcome = match strategy {
            StrategyId::ZeroShot
            | StrategyId::TwoShot
            | StrategyId::Cot
            | StrategyId::SelfReflection => judge_single(&ctx, strategy, pair, order),
            StrategyId::SelfConsistency => judge_self_consistency(
                &ctx,
                pair,
                order,
                SELF_CONSISTENCY_PATHS,
                SELF_CONSISTENCY_TEMPERATURE,
            ),
            StrategyId::Discussion => judge_llm_discussion(&ctx, pair, order).map(|outcome| {
                transcript = Some(outcome.transcript);
                outcome.verdict
            }),
            StrategyId::Pointwise => judge_pointwise(&ctx, pair, order),
            StrategyId::RagNovelty => {
                let rag = self.rag.as_ref().expect("checked by check_resources");
                judge_rag_novelty(&ctx, pair, order, rag.index, rag.embedder, rag.k).map(
                    |outcome| {
                        empty_retrieval = outcome.context.any_empty();
                        outcome.verdict
                    },
                )
            }
        };
        let (verdict, error) = match outcome {
            Ok(verdict) => (verdict, None),
            Err(e) => (
                Verdict {
                    winner: SlotWinner::Unparsed,
                    winner_paper_id: None,
                    score_x: None,
                    score_y: None,
                    raw_response: String::new(),
                    provider_calls: 0,
                },
                Some(e.to_string()),
            ),
        };
        let correct = verdict.winner_paper_id.as_deref() == Some(pair.label.as_str());
        TrialRecord {
            pair_ref: PairRef::from_pair(pair),
            strategy_id: strategy,
            variant: variant.to_string(),
            order,
            provider_calls: verdict.provider_calls,
            correct,
            verdict,
            error,
            empty_retrieval,
            transcript,
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}
