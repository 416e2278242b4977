//! Accuracy aggregation over trial ledgers.
//!
//! Counts are exact integers; accuracies are derived on demand, so merging
//! cells into marginals never accumulates float error and a report can be
//! regenerated bit-identically from its ledger.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Field;
use crate::strategies::{PresentationOrder, SlotWinner, StrategyId};

use super::{EvalError, McnemarResult, TrialRecord};

/// Correct/total counts split by presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OrderTally {
    pub asc_n: u64,
    pub asc_correct: u64,
    pub desc_n: u64,
    pub desc_correct: u64,
}

impl OrderTally {
    fn add(&mut self, order: PresentationOrder, correct: bool) {
        match order {
            PresentationOrder::AscYear => {
                self.asc_n += 1;
                self.asc_correct += u64::from(correct);
            }
            PresentationOrder::DescYear => {
                self.desc_n += 1;
                self.desc_correct += u64::from(correct);
            }
        }
    }

    pub(crate) fn merge(&mut self, other: &OrderTally) {
        self.asc_n += other.asc_n;
        self.asc_correct += other.asc_correct;
        self.desc_n += other.desc_n;
        self.desc_correct += other.desc_correct;
    }

    /// Total order-trials counted.
    pub fn n(&self) -> u64 {
        self.asc_n + self.desc_n
    }

    pub fn asc_accuracy(&self) -> f64 {
        ratio(self.asc_correct, self.asc_n)
    }

    pub fn desc_accuracy(&self) -> f64 {
        ratio(self.desc_correct, self.desc_n)
    }

    /// Accuracy over both orders; equals the mean of the per-order
    /// accuracies whenever both orders have the same n.
    pub fn overall_accuracy(&self) -> f64 {
        ratio(self.asc_correct + self.desc_correct, self.n())
    }
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub field: Field,
    pub start_year: i32,
    pub year_gap: i32,
    pub tally: OrderTally,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub field: Field,
    pub tally: OrderTally,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub year_gap: i32,
    pub tally: OrderTally,
}

/// One McNemar comparison attached to a report: two strategies over the
/// whole run (`cell` absent) or over one dataset cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    pub strategy_a: StrategyId,
    pub strategy_b: StrategyId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<(Field, i32, i32)>,
    pub result: McnemarResult,
}

/// Accuracy breakdowns for one (strategy, variant) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strategy_id: StrategyId,
    pub variant: String,
    /// One row per populated (field, start_year, year_gap) cell; empty cells
    /// are absent, not zero.
    pub per_cell: Vec<CellRow>,
    pub per_field: Vec<FieldRow>,
    pub per_gap: Vec<GapRow>,
    pub overall: OrderTally,
    /// Share of trials whose verdict did not parse (excluding errored ones).
    pub unparsed_rate: f64,
    /// Share of trials recorded with a strategy error.
    pub error_rate: f64,
    pub trial_count: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub significance: Vec<SignificanceEntry>,
}

impl EvalReport {
    pub fn cell(&self, field: Field, start_year: i32, year_gap: i32) -> Option<&OrderTally> {
        self.per_cell
            .iter()
            .find(|row| row.field == field && row.start_year == start_year && row.year_gap == year_gap)
            .map(|row| &row.tally)
    }

    pub fn field_tally(&self, field: Field) -> Option<&OrderTally> {
        self.per_field.iter().find(|row| row.field == field).map(|row| &row.tally)
    }

    pub fn gap_tally(&self, year_gap: i32) -> Option<&OrderTally> {
        self.per_gap.iter().find(|row| row.year_gap == year_gap).map(|row| &row.tally)
    }
}

/// Keeps the trials belonging to one (strategy, variant) run, dropping
/// duplicate trial keys in favor of the earliest record (the ledger is
/// append-only, so the first record is the completed trial).
pub fn filter_trials(trials: &[TrialRecord], strategy: StrategyId, variant: &str) -> Vec<TrialRecord> {
    let mut seen = HashSet::new();
    trials
        .iter()
        .filter(|t| t.strategy_id == strategy && t.variant == variant)
        .filter(|t| seen.insert(t.trial_key()))
        .cloned()
        .collect()
}

/// Aggregates one run's trials into per-cell accuracies, field and gap
/// marginals, and unparsed/error rates. The trials must all come from the
/// same (strategy, variant) run; duplicates resolve to the first record.
pub fn aggregate(trials: &[TrialRecord]) -> Result<EvalReport, EvalError> {
    if trials.is_empty() {
        return Err(EvalError::EmptyTrials);
    }
    let strategy_id = trials[0].strategy_id;
    let variant = trials[0].variant.clone();
    for trial in trials {
        if trial.strategy_id != strategy_id || trial.variant != variant {
            return Err(EvalError::MixedTrials {
                details: format!(
                    "found ({}, {}) and ({}, {})",
                    strategy_id, variant, trial.strategy_id, trial.variant
                ),
            });
        }
    }

    let mut seen = HashSet::new();
    let mut per_cell: BTreeMap<(Field, i32, i32), OrderTally> = BTreeMap::new();
    let mut overall = OrderTally::default();
    let mut unparsed = 0u64;
    let mut errored = 0u64;
    let mut counted = 0u64;
    for trial in trials {
        if !seen.insert(trial.trial_key()) {
            continue;
        }
        counted += 1;
        let cell = (trial.pair_ref.field, trial.pair_ref.start_year, trial.pair_ref.year_gap);
        per_cell.entry(cell).or_default().add(trial.order, trial.correct);
        overall.add(trial.order, trial.correct);
        if trial.error.is_some() {
            errored += 1;
        } else if trial.verdict.winner == SlotWinner::Unparsed {
            unparsed += 1;
        }
    }

    let mut per_field: BTreeMap<Field, OrderTally> = BTreeMap::new();
    let mut per_gap: BTreeMap<i32, OrderTally> = BTreeMap::new();
    for (&(field, _, gap), tally) in &per_cell {
        per_field.entry(field).or_default().merge(tally);
        per_gap.entry(gap).or_default().merge(tally);
    }

    Ok(EvalReport {
        strategy_id,
        variant,
        per_cell: per_cell
            .into_iter()
            .map(|((field, start_year, year_gap), tally)| CellRow { field, start_year, year_gap, tally })
            .collect(),
        per_field: per_field.into_iter().map(|(field, tally)| FieldRow { field, tally }).collect(),
        per_gap: per_gap.into_iter().map(|(year_gap, tally)| GapRow { year_gap, tally }).collect(),
        overall,
        unparsed_rate: ratio(unparsed, counted),
        error_rate: ratio(errored, counted),
        trial_count: counted,
        significance: Vec::new(),
    })
}
