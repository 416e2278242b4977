//! `novbench ingest`: normalize a raw metadata snapshot into a record store.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use novbench_core::corpus::{ingest_metadata, save_records};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw newline-delimited metadata snapshot.
    #[arg(long)]
    pub input: PathBuf,
    /// Destination for the normalized record store.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let file = fs::File::open(&args.input)
        .with_context(|| format!("cannot open snapshot {}", args.input.display()))?;
    let (store, stats) = ingest_metadata(BufReader::new(file))?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = BufWriter::new(
        fs::File::create(&args.out)
            .with_context(|| format!("cannot write {}", args.out.display()))?,
    );
    save_records(&store, &mut out)?;
    out.flush()?;
    println!(
        "ingested {} records ({} malformed skipped, {} out-of-field dropped)",
        stats.ingested, stats.skipped_malformed, stats.dropped_out_of_field
    );
    println!("store digest: {}", store.digest());
    println!("wrote {}", args.out.display());
    Ok(())
}
