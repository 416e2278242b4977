//! McNemar's test for paired accuracy comparisons.
//!
//! Two strategies judged the same (pair, order) trials; only the discordant
//! trials carry information. With few discordant pairs the exact two-sided
//! binomial test applies; otherwise the chi-square approximation with
//! continuity correction.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::corpus::Field;

use super::{EvalError, SignificanceEntry, TrialRecord};

/// Discordant-pair count at and above which the chi-square approximation
/// replaces the exact binomial test.
pub const MCNEMAR_EXACT_LIMIT: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McnemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
}

/// Outcome of one McNemar comparison. `b` counts trials correct only under
/// the first strategy, `c` those correct only under the second.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McnemarResult {
    pub b: u64,
    pub c: u64,
    /// min(b, c) for the exact test; the corrected chi-square statistic
    /// otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McnemarMethod,
}

/// McNemar's test from the discordant counts alone.
///
/// For `b + c < 25` this is the exact two-sided binomial test,
/// `p = min(1, 2 * Σ_{i=0}^{min(b,c)} C(n,i) / 2^n)`; zero discordance gives
/// `p = 1`. Otherwise the statistic is `(|b - c| - 1)^2 / (b + c)` referred
/// to a chi-square distribution with one degree of freedom.
pub fn mcnemar_counts(b: u64, c: u64) -> McnemarResult {
    let n = b + c;
    if n == 0 {
        return McnemarResult {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            method: McnemarMethod::ExactBinomial,
        };
    }
    if n < MCNEMAR_EXACT_LIMIT {
        let k = b.min(c);
        let mut term = 0.5f64.powi(n as i32);
        let mut tail = term;
        for i in 0..k {
            term *= (n - i) as f64 / (i + 1) as f64;
            tail += term;
        }
        McnemarResult {
            b,
            c,
            statistic: k as f64,
            p_value: (2.0 * tail).min(1.0),
            method: McnemarMethod::ExactBinomial,
        }
    } else {
        let diff = b.abs_diff(c) as f64;
        let statistic = (diff - 1.0).powi(2) / n as f64;
        let chi = ChiSquared::new(1.0).expect("valid degrees of freedom");
        McnemarResult {
            b,
            c,
            statistic,
            p_value: 1.0 - chi.cdf(statistic),
            method: McnemarMethod::ChiSquareCorrected,
        }
    }
}

/// Runs McNemar's test between two strategies' trial sets, which must cover
/// exactly the same (pair, order) keys.
pub fn mcnemar(trials_a: &[TrialRecord], trials_b: &[TrialRecord]) -> Result<McnemarResult, EvalError> {
    let key = |t: &TrialRecord| (t.pair_ref.key(), t.order);
    let mut outcomes_b = std::collections::HashMap::with_capacity(trials_b.len());
    for trial in trials_b {
        outcomes_b.insert(key(trial), trial.correct);
    }
    if trials_a.len() != outcomes_b.len() {
        return Err(EvalError::TrialKeyMismatch {
            left: trials_a.len(),
            right: outcomes_b.len(),
        });
    }
    let mut b = 0;
    let mut c = 0;
    for trial in trials_a {
        let Some(&other_correct) = outcomes_b.get(&key(trial)) else {
            return Err(EvalError::TrialKeyMismatch { left: trials_a.len(), right: outcomes_b.len() });
        };
        match (trial.correct, other_correct) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b, c))
}

/// Compares two runs overall and per dataset cell, producing the entries an
/// [`EvalReport`](super::EvalReport) attaches as significance results. Both
/// runs must cover the same (pair, order) trials.
pub fn significance_between(
    trials_a: &[TrialRecord],
    trials_b: &[TrialRecord],
) -> Result<Vec<SignificanceEntry>, EvalError> {
    let strategy_a = trials_a.first().ok_or(EvalError::EmptyTrials)?.strategy_id;
    let strategy_b = trials_b.first().ok_or(EvalError::EmptyTrials)?.strategy_id;
    let mut entries = vec![SignificanceEntry {
        strategy_a,
        strategy_b,
        cell: None,
        result: mcnemar(trials_a, trials_b)?,
    }];
    let cells: std::collections::BTreeSet<(Field, i32, i32)> = trials_a
        .iter()
        .map(|t| (t.pair_ref.field, t.pair_ref.start_year, t.pair_ref.year_gap))
        .collect();
    for cell in cells {
        let select = |trials: &[TrialRecord]| -> Vec<TrialRecord> {
            trials
                .iter()
                .filter(|t| {
                    (t.pair_ref.field, t.pair_ref.start_year, t.pair_ref.year_gap) == cell
                })
                .cloned()
                .collect()
        };
        entries.push(SignificanceEntry {
            strategy_a,
            strategy_b,
            cell: Some(cell),
            result: mcnemar(&select(trials_a), &select(trials_b))?,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::super::aggregate::tests::make_trial;
    use super::*;
    use crate::strategies::{PresentationOrder, StrategyId};

    fn binomial_u128(n: u64, k: u64) -> u128 {
        let mut result: u128 = 1;
        for i in 0..k.min(n - k) {
            result = result * (n - i) as u128 / (i + 1) as u128;
        }
        result
    }

    fn exact_oracle(b: u64, c: u64) -> f64 {
        let n = b + c;
        let tail: u128 = (0..=b.min(c)).map(|i| binomial_u128(n, i)).sum();
        (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn zero_discordance_is_p_one() {
        let result = mcnemar_counts(0, 0);
        assert_eq!(result.p_value, 1.0);
        assert_eq!(result.method, McnemarMethod::ExactBinomial);
    }

    #[test]
    fn exact_branch_matches_direct_binomial_summation() {
        for b in 0..=24u64 {
            for c in 0..=(24 - b) {
                let result = mcnemar_counts(b, c);
                if b + c < MCNEMAR_EXACT_LIMIT {
                    assert_eq!(result.method, McnemarMethod::ExactBinomial);
                    assert!(
                        (result.p_value - exact_oracle(b, c)).abs() < 1e-12,
                        "b={b} c={c}: {} vs {}",
                        result.p_value,
                        exact_oracle(b, c)
                    );
                }
            }
        }
    }

    #[test]
    fn ten_twenty_discordance_uses_the_chi_square_branch() {
        let result = mcnemar_counts(10, 20);
        assert_eq!(result.method, McnemarMethod::ChiSquareCorrected);
        assert!((result.statistic - 81.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn fifty_hundred_statistic_is_hand_checkable() {
        let result = mcnemar_counts(50, 100);
        assert_eq!(result.method, McnemarMethod::ChiSquareCorrected);
        assert!((result.statistic - 2401.0 / 150.0).abs() < 1e-9);
        assert!(result.statistic > 16.006 && result.statistic < 16.007);
        assert!(result.p_value < 0.05);
        assert!(result.p_value > 0.0);
    }

    #[test]
    fn threshold_sits_at_twenty_five_discordant_pairs() {
        assert_eq!(mcnemar_counts(12, 12).method, McnemarMethod::ExactBinomial);
        assert_eq!(mcnemar_counts(12, 13).method, McnemarMethod::ChiSquareCorrected);
    }

    #[test]
    fn symmetric_in_b_and_c() {
        let ab = mcnemar_counts(3, 9);
        let ba = mcnemar_counts(9, 3);
        assert_eq!(ab.p_value, ba.p_value);
        assert_eq!(ab.statistic, ba.statistic);
        let big_ab = mcnemar_counts(40, 80);
        let big_ba = mcnemar_counts(80, 40);
        assert_eq!(big_ab.p_value, big_ba.p_value);
    }

    /// Two runs over the same 8 (pair, order) keys with a planted
    /// discordance pattern: A correct only on trials 0-1, B correct only on
    /// trials 2-4, both correct on 5, both wrong on 6-7.
    fn paired_runs() -> (Vec<TrialRecord>, Vec<TrialRecord>) {
        let correct_a = [true, true, false, false, false, true, false, false];
        let correct_b = [false, false, true, true, true, true, false, false];
        let build = |corrects: [bool; 8], strategy: StrategyId| -> Vec<TrialRecord> {
            corrects
                .iter()
                .enumerate()
                .map(|(i, &correct)| {
                    let order = if i % 2 == 0 {
                        PresentationOrder::AscYear
                    } else {
                        PresentationOrder::DescYear
                    };
                    let mut trial =
                        make_trial(Field::Cs, 2023, 4, i / 2, order, correct, correct);
                    trial.strategy_id = strategy;
                    trial
                })
                .collect()
        };
        (build(correct_a, StrategyId::ZeroShot), build(correct_b, StrategyId::RagNovelty))
    }

    #[test]
    fn trial_sets_produce_discordant_counts() {
        let (a, b) = paired_runs();
        let result = mcnemar(&a, &b).unwrap();
        assert_eq!((result.b, result.c), (2, 3));
        assert_eq!(result.method, McnemarMethod::ExactBinomial);
        assert!((result.p_value - 1.0).abs() < 1e-12, "2 vs 3 of 5 is far from significant");
    }

    #[test]
    fn mismatched_trial_keys_are_rejected() {
        let (a, b) = paired_runs();
        assert!(matches!(
            mcnemar(&a, &b[..7]),
            Err(EvalError::TrialKeyMismatch { left: 8, right: 7 })
        ));
        let mut moved = b.clone();
        moved[0].pair_ref.start_year = 1999;
        assert!(matches!(mcnemar(&a, &moved), Err(EvalError::TrialKeyMismatch { .. })));
    }

    #[test]
    fn significance_entries_cover_overall_and_each_cell() {
        let (mut a, mut b) = paired_runs();
        let (extra_a, extra_b) = paired_runs();
        for mut trial in extra_a {
            trial.pair_ref.field = Field::Math;
            a.push(trial);
        }
        for mut trial in extra_b {
            trial.pair_ref.field = Field::Math;
            b.push(trial);
        }
        let entries = significance_between(&a, &b).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].cell, None);
        assert_eq!(entries[0].result.b, 4);
        assert_eq!(entries[1].cell, Some((Field::Cs, 2023, 4)));
        assert_eq!(entries[2].cell, Some((Field::Math, 2023, 4)));
        assert_eq!(entries[0].strategy_a, StrategyId::ZeroShot);
        assert_eq!(entries[0].strategy_b, StrategyId::RagNovelty);
    }
}
