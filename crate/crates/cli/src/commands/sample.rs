//! `novbench sample`: draw the pair dataset from a record store.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use novbench_core::corpus::sample_dataset;

use crate::config::{LoadedConfig, Needs};

use super::{read_store, write_manifest, write_pairs};

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides dataset.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides dataset.samples_per_cell.
    #[arg(long)]
    pub samples_per_cell: Option<usize>,
    /// Destination file; defaults to `pairs.jsonl` under the output
    /// directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SampleManifest {
    command: &'static str,
    config_hash: String,
    seed: u64,
    store_digest: String,
    pair_count: usize,
    cell_count: usize,
    samples_per_cell: usize,
    pairs_file: String,
}

pub fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let mut loaded = LoadedConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        loaded.config.dataset.seed = seed;
    }
    if let Some(samples) = args.samples_per_cell {
        loaded.config.dataset.samples_per_cell = samples;
    }
    loaded.validate(Needs { store: true, ..Needs::default() })?;

    let store = read_store(&loaded.store_path())?;
    let spec = loaded.config.dataset.spec();
    let pairs = sample_dataset(&store, &spec)?;

    let output_dir = loaded.output_dir();
    fs::create_dir_all(&output_dir)?;
    let out = args.out.clone().unwrap_or_else(|| loaded.pairs_path());
    write_pairs(&out, &pairs)?;

    let cell_count = spec.fields.len() * spec.start_years.len() * spec.year_gaps.len();
    write_manifest(
        &output_dir.join("sample_manifest.json"),
        &SampleManifest {
            command: "sample",
            config_hash: loaded.config_hash(),
            seed: spec.rng_seed,
            store_digest: store.digest(),
            pair_count: pairs.len(),
            cell_count,
            samples_per_cell: spec.samples_per_cell,
            pairs_file: out.display().to_string(),
        },
    )?;
    println!("sampled {} pairs across {} cells", pairs.len(), cell_count);
    println!("wrote {}", out.display());
    Ok(())
}
