//! `novbench build-index`: embed a per-field retrieval pool and persist it.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use novbench_core::corpus::sample_index_pool;
use novbench_core::index::{build_index, Embedder, HashEmbedder};

use crate::config::{LoadedConfig, Needs};

use super::{file_digest, read_store, write_manifest};

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides index.per_year.
    #[arg(long)]
    pub per_year: Option<usize>,
    /// Overrides index.seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct IndexProvenance {
    command: &'static str,
    config_hash: String,
    field: String,
    per_year: usize,
    years: [i32; 2],
    seed: u64,
    dimension: usize,
    embedding_model_id: String,
    entry_count: usize,
    entries_digest: String,
    index_dir: String,
}

pub fn cmd_build_index(args: &BuildIndexArgs) -> Result<()> {
    let mut loaded = LoadedConfig::load(&args.config)?;
    anyhow::ensure!(loaded.config.index.is_some(), "config has no [index] section");
    if let Some(section) = loaded.config.index.as_mut() {
        if let Some(per_year) = args.per_year {
            section.per_year = per_year;
        }
        if let Some(seed) = args.seed {
            section.seed = seed;
        }
    }
    loaded.validate(Needs { store: true, ..Needs::default() })?;

    let store = read_store(&loaded.store_path())?;
    let section = loaded.index_section()?.clone();
    let (pool, warnings) = sample_index_pool(
        &store,
        section.field,
        section.years[0]..=section.years[1],
        section.per_year,
        section.seed,
    );
    for warning in &warnings {
        eprintln!(
            "warning: {} {}: only {} of {} requested papers available",
            warning.field, warning.year, warning.available, warning.requested
        );
    }

    let embedder = HashEmbedder::new(section.dimension);
    let index = build_index(&pool, &embedder)?;
    let dir = loaded.index_dir()?;
    index.save(&dir)?;

    fs::create_dir_all(loaded.output_dir())?;
    write_manifest(
        &loaded.output_dir().join("index_provenance.json"),
        &IndexProvenance {
            command: "build-index",
            config_hash: loaded.config_hash(),
            field: section.field.to_string(),
            per_year: section.per_year,
            years: section.years,
            seed: section.seed,
            dimension: section.dimension,
            embedding_model_id: embedder.model_id().to_string(),
            entry_count: index.len(),
            entries_digest: file_digest(&dir.join("entries.bin"))?,
            index_dir: dir.display().to_string(),
        },
    )?;
    println!("indexed {} papers for {}", index.len(), section.field);
    println!("wrote {}", dir.display());
    Ok(())
}
