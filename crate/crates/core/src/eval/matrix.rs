//! Grid runs: strategy × metadata-ablation sweeps, plus the affiliation
//! swap protocol (prestigious affiliation on the newer paper, then on the
//! older one) as two labeled sub-runs.

use crate::corpus::PairSample;
use crate::strategies::{MetadataOptions, StrategyId};

use super::{aggregate, filter_trials, EvalError, EvalReport, EvalRunner};

/// One metadata configuration in a grid run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationSpec {
    /// Variant label recorded on every trial, e.g. "plain" or "tldr".
    pub label: String,
    pub metadata: MetadataOptions,
}

impl AblationSpec {
    pub fn new(label: impl Into<String>, metadata: MetadataOptions) -> AblationSpec {
        AblationSpec { label: label.into(), metadata }
    }

    /// The no-metadata baseline.
    pub fn plain() -> AblationSpec {
        AblationSpec::new("plain", MetadataOptions::NONE)
    }
}

/// Affiliation strings for the swap protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffiliationSwap {
    pub research_affiliation: String,
    pub teaching_affiliation: String,
}

/// What a grid run covers: metadata ablations, optionally followed by the
/// two affiliation sub-runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixOptions {
    pub ablations: Vec<AblationSpec>,
    pub affiliation_swap: Option<AffiliationSwap>,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions { ablations: vec![AblationSpec::plain()], affiliation_swap: None }
    }
}

/// Variant labels for the two affiliation sub-runs: which paper carries the
/// research-university affiliation.
pub(crate) const AFFILIATION_VARIANTS: [(&str, bool); 2] = [
    ("affiliation/newer=research-univ", true),
    ("affiliation/newer=teaching-univ", false),
];

fn assign_affiliations(
    pairs: &[PairSample],
    swap: &AffiliationSwap,
    newer_gets_research: bool,
) -> Vec<PairSample> {
    let (newer, older) = if newer_gets_research {
        (&swap.research_affiliation, &swap.teaching_affiliation)
    } else {
        (&swap.teaching_affiliation, &swap.research_affiliation)
    };
    pairs
        .iter()
        .map(|pair| {
            let mut assigned = pair.clone();
            assigned.paper_x = assigned.paper_x.with_affiliation(newer);
            assigned.paper_y = assigned.paper_y.with_affiliation(older);
            assigned
        })
        .collect()
}

/// Runs every requested (strategy, variant) grid point over `pairs` and
/// returns one report per point, in grid order. Completed trials resume
/// from the runner's ledger, so re-running an unchanged grid re-executes
/// nothing and reproduces identical reports.
pub fn run_matrix(
    runner: &EvalRunner<'_>,
    pairs: &[PairSample],
    strategies: &[StrategyId],
    options: &MatrixOptions,
) -> Result<Vec<EvalReport>, EvalError> {
    let mut reports = Vec::new();
    for &strategy in strategies {
        for ablation in &options.ablations {
            runner.run_dataset(strategy, pairs, &ablation.label, ablation.metadata)?;
            let trials = filter_trials(&runner.trials(), strategy, &ablation.label);
            reports.push(aggregate(&trials)?);
        }
        if let Some(swap) = &options.affiliation_swap {
            let metadata = MetadataOptions { include_affiliation: true, ..MetadataOptions::NONE };
            for (label, newer_gets_research) in AFFILIATION_VARIANTS {
                let assigned = assign_affiliations(pairs, swap, newer_gets_research);
                runner.run_dataset(strategy, &assigned, label, metadata)?;
                let trials = filter_trials(&runner.trials(), strategy, label);
                reports.push(aggregate(&trials)?);
            }
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::super::tests::sample_pair;
    use super::*;
    use crate::gateway::{Gateway, MockProvider};
    use tempfile::TempDir;

    fn swap() -> AffiliationSwap {
        AffiliationSwap {
            research_affiliation: "Apex Research University".to_string(),
            teaching_affiliation: "Lakeside Teaching College".to_string(),
        }
    }

    fn pair_with_metadata() -> crate::corpus::PairSample {
        let mut pair = sample_pair();
        pair.paper_x = pair
            .paper_x
            .with_tldr("Newer summary.")
            .with_authors(vec!["Ada Prime".to_string()]);
        pair.paper_y = pair
            .paper_y
            .with_tldr("Older summary.")
            .with_authors(vec!["Grace Vector".to_string()]);
        pair
    }

    #[test]
    fn grid_produces_one_report_per_variant() {
        let dir = TempDir::new().unwrap();
        let gateway = Gateway::new(MockProvider::with_rule(|_| "1".to_string()));
        let runner =
            super::super::EvalRunner::new(&gateway, "mock-model", dir.path().join("t.jsonl"))
                .unwrap();
        let pairs = vec![pair_with_metadata()];
        let options = MatrixOptions {
            ablations: vec![
                AblationSpec::plain(),
                AblationSpec::new(
                    "tldr",
                    MetadataOptions { include_tldr: true, ..MetadataOptions::NONE },
                ),
                AblationSpec::new(
                    "authors",
                    MetadataOptions { include_authors: true, ..MetadataOptions::NONE },
                ),
            ],
            affiliation_swap: None,
        };
        let reports =
            run_matrix(&runner, &pairs, &[StrategyId::SelfReflection], &options).unwrap();
        assert_eq!(reports.len(), 3);
        let labels: Vec<&str> = reports.iter().map(|r| r.variant.as_str()).collect();
        assert_eq!(labels, ["plain", "tldr", "authors"]);
        assert!(reports.iter().all(|r| r.trial_count == 2));
        assert!(reports.iter().all(|r| r.strategy_id == StrategyId::SelfReflection));
    }

    #[test]
    fn affiliation_swap_adds_two_labeled_sub_runs() {
        let dir = TempDir::new().unwrap();
        let provider = MockProvider::with_rule(|_| "1".to_string());
        let gateway = Gateway::new(provider.clone());
        let runner =
            super::super::EvalRunner::new(&gateway, "mock-model", dir.path().join("t.jsonl"))
                .unwrap();
        let pairs = vec![sample_pair()];
        let options = MatrixOptions {
            ablations: vec![AblationSpec::plain()],
            affiliation_swap: Some(swap()),
        };
        let reports = run_matrix(&runner, &pairs, &[StrategyId::ZeroShot], &options).unwrap();
        let labels: Vec<&str> = reports.iter().map(|r| r.variant.as_str()).collect();
        assert_eq!(
            labels,
            ["plain", "affiliation/newer=research-univ", "affiliation/newer=teaching-univ"]
        );

        let newer_title = "Adaptive Widgets";
        let mut saw_research_on_newer = false;
        let mut saw_teaching_on_newer = false;
        for request in provider.requests() {
            let user = &request.messages[1].content;
            if !user.contains("Affiliation:") {
                continue;
            }
            let newer_slot = user.find(newer_title).unwrap();
            let research = user.find("Apex Research University");
            let teaching = user.find("Lakeside Teaching College");
            let (Some(research), Some(teaching)) = (research, teaching) else {
                panic!("both affiliations rendered in: {user}");
            };
            let next_affiliation = research.min(teaching);
            if newer_slot < next_affiliation {
                // the newer paper is in slot 1; its affiliation line comes first
                if research < teaching {
                    saw_research_on_newer = true;
                } else {
                    saw_teaching_on_newer = true;
                }
            }
        }
        assert!(saw_research_on_newer, "one sub-run puts the research affiliation on the newer paper");
        assert!(saw_teaching_on_newer, "the other sub-run swaps it");
    }

    #[test]
    fn rerunning_an_unchanged_grid_is_free_and_identical() {
        let dir = TempDir::new().unwrap();
        let provider = MockProvider::with_rule(|_| "2".to_string());
        let gateway = Gateway::new(provider.clone());
        let runner =
            super::super::EvalRunner::new(&gateway, "mock-model", dir.path().join("t.jsonl"))
                .unwrap();
        let pairs = vec![pair_with_metadata()];
        let options = MatrixOptions::default();
        let first = run_matrix(&runner, &pairs, &[StrategyId::ZeroShot, StrategyId::Cot], &options)
            .unwrap();
        let calls_after_first = provider.request_count();
        let second = run_matrix(&runner, &pairs, &[StrategyId::ZeroShot, StrategyId::Cot], &options)
            .unwrap();
        assert_eq!(provider.request_count(), calls_after_first, "second run hits the ledger");
        assert_eq!(first, second);
    }
}
