//! Subcommand implementations.

pub mod build_index;
pub mod ingest;
pub mod report;
pub mod run;
pub mod sample;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use novbench_core::corpus::{load_store, CorpusStore, PairSample};

fn read_store(path: &Path) -> Result<CorpusStore> {
    let file = fs::File::open(path)
        .with_context(|| format!("cannot open corpus store {}", path.display()))?;
    load_store(BufReader::new(file))
        .with_context(|| format!("cannot load corpus store {}", path.display()))
}

fn read_pairs(path: &Path) -> Result<Vec<PairSample>> {
    let file = fs::File::open(path)
        .with_context(|| format!("cannot open pair dataset {}", path.display()))?;
    let mut pairs = Vec::new();
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: PairSample = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: invalid pair record", path.display(), number + 1))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

fn write_pairs(path: &Path, pairs: &[PairSample]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    );
    for pair in pairs {
        serde_json::to_writer(&mut out, pair)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a manifest as pretty JSON with a trailing newline. Manifests carry
/// no timestamps, so identical inputs reproduce identical bytes.
fn write_manifest(path: &Path, manifest: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(crate::config::hex_string(&hasher.finalize()))
}
