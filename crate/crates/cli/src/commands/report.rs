//! `novbench report`: turn a finished trial ledger into tables.
//!
//! Reports are pure functions of the ledger: no timestamps, deterministic
//! row order, so re-running the command reproduces identical bytes.

use std::fs;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::Args;
use serde::Serialize;

use novbench_core::eval::{
    aggregate, cell_table_csv, field_table_csv, filter_trials, gap_field_curve_csv,
    gap_start_year_curve_csv, gap_table_csv, significance_between, significance_table_csv,
    TrialLedger,
};
use novbench_core::strategies::StrategyId;

use crate::config::{LoadedConfig, Needs};

use super::{file_digest, write_manifest};

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated strategy list, overriding run.strategies.
    #[arg(long)]
    pub strategies: Option<String>,
    /// Overrides run.variant.
    #[arg(long)]
    pub variant: Option<String>,
    /// Destination directory; defaults to `reports` under the output
    /// directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReportManifest {
    command: &'static str,
    config_hash: String,
    ledger_file: String,
    ledger_digest: String,
    strategies: Vec<StrategyId>,
    variant: String,
}

/// Variant labels may contain separators ("affiliation/newer=research-univ");
/// directory names keep only filesystem-safe characters.
fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '-' })
        .collect()
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut loaded = LoadedConfig::load(&args.config)?;
    if let Some(raw) = &args.strategies {
        loaded.config.run.strategies = crate::config::parse_strategy_list(raw)?;
    }
    if let Some(variant) = &args.variant {
        loaded.config.run.variant = variant.clone();
    }
    loaded.validate(Needs::default())?;

    let ledger_path = loaded.ledger_path();
    ensure!(
        ledger_path.is_file(),
        "trial ledger {} does not exist; run `novbench run` first",
        ledger_path.display()
    );
    let records = TrialLedger::new(&ledger_path).load()?;
    let variant = loaded.config.run.variant.clone();
    let strategies = loaded.config.run.strategies.clone();
    let reports_dir = args.out.clone().unwrap_or_else(|| loaded.reports_dir());

    let mut per_strategy = Vec::new();
    for &strategy in &strategies {
        let trials = filter_trials(&records, strategy, &variant);
        ensure!(
            !trials.is_empty(),
            "ledger holds no {strategy} trials for variant '{variant}'"
        );
        let report = aggregate(&trials)?;
        let dir = reports_dir.join(format!("{}__{}", strategy, sanitize(&variant)));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("cells.csv"), cell_table_csv(&report))?;
        fs::write(dir.join("fields.csv"), field_table_csv(&report))?;
        fs::write(dir.join("gaps.csv"), gap_table_csv(&report))?;
        fs::write(dir.join("gap_field_curve.csv"), gap_field_curve_csv(&report))?;
        fs::write(dir.join("gap_start_year_curve.csv"), gap_start_year_curve_csv(&report))?;
        let mut report_json = serde_json::to_vec_pretty(&report)?;
        report_json.push(b'\n');
        fs::write(dir.join("report.json"), report_json)?;

        println!("== {strategy} ({variant}) ==");
        print!("{}", cell_table_csv(&report));
        println!(
            "overall,,,{},{:.6},{:.6},{:.6}",
            report.overall.n(),
            report.overall.asc_accuracy(),
            report.overall.desc_accuracy(),
            report.overall.overall_accuracy()
        );
        per_strategy.push((strategy, trials));
    }

    if per_strategy.len() >= 2 {
        let mut entries = Vec::new();
        for i in 0..per_strategy.len() {
            for j in (i + 1)..per_strategy.len() {
                let (a, trials_a) = &per_strategy[i];
                let (b, trials_b) = &per_strategy[j];
                entries.extend(significance_between(trials_a, trials_b).with_context(
                    || format!("cannot compare {a} with {b}: trial coverage differs"),
                )?);
            }
        }
        fs::create_dir_all(&reports_dir)?;
        fs::write(reports_dir.join("significance.csv"), significance_table_csv(&entries))?;
    }

    write_manifest(
        &reports_dir.join("report_manifest.json"),
        &ReportManifest {
            command: "report",
            config_hash: loaded.config_hash(),
            ledger_file: ledger_path.display().to_string(),
            ledger_digest: file_digest(&ledger_path)?,
            strategies,
            variant,
        },
    )?;
    println!("reports: {}", reports_dir.display());
    Ok(())
}
