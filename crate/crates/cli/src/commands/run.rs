//! `novbench run`: execute the configured strategies over the pair dataset.
//!
//! Every trial lands in the append-only ledger before the run moves on, so
//! an interrupted run resumes where it stopped. `--dry-run` prints the full
//! trial plan without constructing a provider.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use novbench_core::corpus::{sample_dataset, DatasetSpec, Field, PairSample};
use novbench_core::eval::{aggregate, filter_trials, EvalRunner, RagResources, TrialRecord};
use novbench_core::gateway::{
    always_first_slot, date_aware_judge, Gateway, HttpProvider, MockProvider,
};
use novbench_core::index::{Embedder, HashEmbedder, Index};
use novbench_core::strategies::{Exemplar, PresentationOrder, StrategyId};

use crate::config::{LoadedConfig, MockBehavior, Needs, ProviderKind};

use super::{file_digest, read_pairs, read_store, write_manifest};

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated strategy list, overriding run.strategies.
    #[arg(long)]
    pub strategies: Option<String>,
    /// Overrides run.variant.
    #[arg(long)]
    pub variant: Option<String>,
    /// Pair dataset to judge; defaults to `pairs.jsonl` under the output
    /// directory.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Print the trial plan and exit without any provider calls.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Serialize)]
struct RunSeeds {
    dataset: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    two_shot_exemplars: Option<u64>,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_hash: String,
    model_id: String,
    strategies: Vec<StrategyId>,
    variant: String,
    seeds: RunSeeds,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding_model_id: Option<String>,
    pairs_file: String,
    pairs_digest: String,
    ledger_file: String,
}

fn apply_overrides(loaded: &mut LoadedConfig, args: &RunArgs) -> Result<()> {
    if let Some(raw) = &args.strategies {
        loaded.config.run.strategies = crate::config::parse_strategy_list(raw)?;
    }
    if let Some(variant) = &args.variant {
        loaded.config.run.variant = variant.clone();
    }
    Ok(())
}

fn print_plan(loaded: &LoadedConfig, pairs: &[PairSample]) {
    let mut cells: BTreeMap<(Field, i32, i32), u64> = BTreeMap::new();
    for pair in pairs {
        *cells.entry((pair.field, pair.start_year, pair.year_gap)).or_default() += 1;
    }
    let strategies = &loaded.config.run.strategies;
    let variant = &loaded.config.run.variant;
    println!(
        "trial plan: {} strategies x {} cells x both presentation orders over {} pairs",
        strategies.len(),
        cells.len(),
        pairs.len()
    );
    let mut total = 0u64;
    for strategy in strategies {
        for ((field, start_year, year_gap), count) in &cells {
            for order in PresentationOrder::BOTH {
                println!(
                    "  {strategy} {variant} {field}/{start_year}/gap={year_gap} {order}: {count} trials"
                );
                total += count;
            }
        }
    }
    println!("total: {total} trials; no provider calls made");
}

/// Draws the two worked two-shot examples from the configured held-out
/// cell, one per presentation order so both answer positions appear.
fn draw_exemplars(loaded: &LoadedConfig) -> Result<Vec<Exemplar>> {
    let section = loaded
        .config
        .run
        .two_shot_exemplars
        .as_ref()
        .context("two_shot requires [run.two_shot_exemplars]")?;
    let store = read_store(&loaded.store_path())?;
    let spec = DatasetSpec {
        fields: vec![section.field],
        start_years: vec![section.start_year],
        year_gaps: vec![section.year_gap],
        samples_per_cell: 2,
        rng_seed: section.seed,
    };
    let pairs = sample_dataset(&store, &spec).context("cannot draw two-shot exemplars")?;
    Ok(vec![
        Exemplar::from_pair(&pairs[0], PresentationOrder::AscYear),
        Exemplar::from_pair(&pairs[1], PresentationOrder::DescYear),
    ])
}

/// Per-cell share of errored trials, checked against the configured
/// threshold after the run.
fn cells_over_threshold(trials: &[TrialRecord], threshold: f64) -> Vec<String> {
    let mut cells: BTreeMap<(Field, i32, i32), (u64, u64)> = BTreeMap::new();
    for trial in trials {
        let entry = cells
            .entry((trial.pair_ref.field, trial.pair_ref.start_year, trial.pair_ref.year_gap))
            .or_default();
        entry.1 += 1;
        if trial.error.is_some() {
            entry.0 += 1;
        }
    }
    cells
        .into_iter()
        .filter_map(|((field, start_year, year_gap), (errored, total))| {
            let rate = errored as f64 / total as f64;
            (rate > threshold).then(|| {
                format!("{field}/{start_year}/gap={year_gap}: {errored}/{total} trials errored")
            })
        })
        .collect()
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut loaded = LoadedConfig::load(&args.config)?;
    apply_overrides(&mut loaded, args)?;
    let needs_store = loaded.config.run.strategies.contains(&StrategyId::TwoShot);
    loaded.validate(Needs { store: needs_store, pairs: args.pairs.is_none(), index: true })?;

    let pairs_path = args.pairs.clone().unwrap_or_else(|| loaded.pairs_path());
    let pairs = read_pairs(&pairs_path)?;
    if pairs.is_empty() {
        bail!("pair dataset {} is empty", pairs_path.display());
    }
    if loaded.config.run.strategies.contains(&StrategyId::RagNovelty) {
        let indexed_field = loaded.index_section()?.field;
        let foreign = pairs.iter().filter(|pair| pair.field != indexed_field).count();
        if foreign > 0 {
            bail!(
                "pair dataset {} holds {foreign} pairs outside the indexed field {indexed_field}; \
                 re-run `novbench sample` with dataset.fields = [\"{indexed_field}\"]",
                pairs_path.display()
            );
        }
    }

    if args.dry_run {
        print_plan(&loaded, &pairs);
        return Ok(());
    }

    let provider_cfg = &loaded.config.provider;
    let mut gateway = match provider_cfg.kind {
        ProviderKind::Mock => match provider_cfg.behavior {
            MockBehavior::FirstSlot => Gateway::new(MockProvider::with_rule(always_first_slot())),
            MockBehavior::DateAware => Gateway::new(MockProvider::with_rule(date_aware_judge())),
        },
        ProviderKind::Http => {
            let endpoint = provider_cfg.endpoint.as_deref().expect("validated");
            Gateway::new(HttpProvider::new(endpoint, provider_cfg.api_key_env.as_deref()))
        }
    };
    if let Some(limit) = provider_cfg.rate_limit {
        gateway = gateway.with_rate_limit(limit);
    }
    if let Some(cache_dir) = &provider_cfg.cache_dir {
        gateway = gateway.with_cache_dir(loaded.resolve(cache_dir));
    }

    fs::create_dir_all(loaded.output_dir())?;
    let ledger_path = loaded.ledger_path();
    let rag_index;
    let rag_embedder;
    let mut runner = EvalRunner::new(&gateway, provider_cfg.model_id.as_str(), &ledger_path)?;

    if loaded.config.run.strategies.contains(&StrategyId::TwoShot) {
        runner = runner.with_exemplars(draw_exemplars(&loaded)?);
    }

    let rag_needed = loaded.config.run.strategies.contains(&StrategyId::RagNovelty);
    let mut k = None;
    let mut embedding_model_id = None;
    if rag_needed {
        let section = loaded.index_section()?;
        rag_index = Index::load(&loaded.index_dir()?)?;
        rag_embedder = HashEmbedder::new(rag_index.manifest().dimension);
        k = Some(section.k);
        embedding_model_id = Some(rag_embedder.model_id().to_string());
        runner = runner.with_rag(RagResources {
            index: &rag_index,
            embedder: &rag_embedder,
            k: section.k,
        });
    }

    let variant = loaded.config.run.variant.clone();
    let metadata = loaded.config.run.metadata.options();
    let threshold = loaded.config.run.error_rate_threshold;
    let mut offenders = Vec::new();
    for &strategy in &loaded.config.run.strategies {
        let summary = runner.run_dataset(strategy, &pairs, &variant, metadata)?;
        let trials = filter_trials(&runner.trials(), strategy, &variant);
        let report = aggregate(&trials)?;
        println!(
            "{strategy} {variant}: {} executed, {} resumed, {} errored; \
             accuracy asc {:.4} / desc {:.4} / overall {:.4} (unparsed {:.4})",
            summary.executed,
            summary.skipped,
            summary.errored,
            report.overall.asc_accuracy(),
            report.overall.desc_accuracy(),
            report.overall.overall_accuracy(),
            report.unparsed_rate,
        );
        offenders.extend(
            cells_over_threshold(&trials, threshold)
                .into_iter()
                .map(|message| format!("{strategy} {message}")),
        );
    }

    let section = loaded.config.index.as_ref();
    write_manifest(
        &loaded.output_dir().join("run_manifest.json"),
        &RunManifest {
            command: "run",
            config_hash: loaded.config_hash(),
            model_id: provider_cfg.model_id.clone(),
            strategies: loaded.config.run.strategies.clone(),
            variant: variant.clone(),
            seeds: RunSeeds {
                dataset: loaded.config.dataset.seed,
                index: section.map(|s| s.seed),
                two_shot_exemplars: loaded.config.run.two_shot_exemplars.as_ref().map(|e| e.seed),
            },
            k,
            embedding_model_id,
            pairs_file: pairs_path.display().to_string(),
            pairs_digest: file_digest(&pairs_path)?,
            ledger_file: ledger_path.display().to_string(),
        },
    )?;

    if !offenders.is_empty() {
        bail!(
            "error rate above threshold {threshold} in {} cell(s):\n  {}",
            offenders.len(),
            offenders.join("\n  ")
        );
    }
    println!("ledger: {}", ledger_path.display());
    Ok(())
}
