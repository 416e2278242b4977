//! Declarative run configuration.
//!
//! One TOML file describes an experiment end to end: corpus store, dataset
//! grid, provider, strategies, and (optionally) the retrieval index. Command
//! flags override individual values; anything else falls back to the
//! benchmark defaults. All randomness flows from the seeds named here —
//! there are no wall-clock defaults — so a config file plus a metadata
//! snapshot reproduces every artifact byte for byte.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use novbench_core::corpus::{DatasetSpec, Field};
use novbench_core::strategies::{MetadataOptions, StrategyId};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory receiving every artifact (pairs, ledger, reports,
    /// manifests). Relative paths resolve against the config file.
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    pub provider: ProviderSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Normalized record store written by `novbench ingest`.
    pub store: PathBuf,
    #[serde(default = "all_fields")]
    pub fields: Vec<Field>,
    #[serde(default = "default_start_years")]
    pub start_years: Vec<i32>,
    #[serde(default = "default_year_gaps")]
    pub year_gaps: Vec<i32>,
    #[serde(default = "default_samples_per_cell")]
    pub samples_per_cell: usize,
    pub seed: u64,
}

fn all_fields() -> Vec<Field> {
    Field::ALL.to_vec()
}

fn default_start_years() -> Vec<i32> {
    (2019..=2023).collect()
}

fn default_year_gaps() -> Vec<i32> {
    vec![2, 4, 6, 8, 10]
}

fn default_samples_per_cell() -> usize {
    100
}

impl DatasetSection {
    pub fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            fields: self.fields.clone(),
            start_years: self.start_years.clone(),
            year_gaps: self.year_gaps.clone(),
            samples_per_cell: self.samples_per_cell,
            rng_seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Http,
}

/// How the built-in mock provider answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockBehavior {
    /// Always picks the first presentation slot.
    #[default]
    FirstSlot,
    /// Picks the paper whose retrieved context carries the later average
    /// date, falling back to the first slot.
    DateAware,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub model_id: String,
    #[serde(default)]
    pub behavior: MockBehavior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key; the key itself
    /// never appears in config files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Provider calls per second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataSection {
    #[serde(default)]
    pub tldr: bool,
    #[serde(default)]
    pub authors: bool,
    #[serde(default)]
    pub affiliation: bool,
}

impl MetadataSection {
    pub fn options(&self) -> MetadataOptions {
        MetadataOptions {
            include_tldr: self.tldr,
            include_authors: self.authors,
            include_affiliation: self.affiliation,
        }
    }
}

/// Cell supplying the two worked examples for the two-shot strategy. Must
/// lie outside the evaluation grid so the examples are held out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExemplarSection {
    pub field: Field,
    pub start_year: i32,
    pub year_gap: i32,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyId>,
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default)]
    pub metadata: MetadataSection,
    /// A run exits nonzero if any cell's share of errored trials exceeds
    /// this.
    #[serde(default = "default_error_rate_threshold")]
    pub error_rate_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_shot_exemplars: Option<ExemplarSection>,
}

fn default_strategies() -> Vec<StrategyId> {
    vec![StrategyId::ZeroShot]
}

fn default_variant() -> String {
    "plain".to_string()
}

fn default_error_rate_threshold() -> f64 {
    0.05
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            strategies: default_strategies(),
            variant: default_variant(),
            metadata: MetadataSection::default(),
            error_rate_threshold: default_error_rate_threshold(),
            two_shot_exemplars: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    pub field: Field,
    #[serde(default = "default_per_year")]
    pub per_year: usize,
    /// Inclusive `[first, last]` publication-year range to index.
    pub years: [i32; 2],
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub seed: u64,
    /// Index directory; defaults to `index-<field>` under the output
    /// directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn default_per_year() -> usize {
    500
}

fn default_k() -> usize {
    10
}

fn default_dimension() -> usize {
    256
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(LoadedConfig { config, base_dir })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }

    pub fn store_path(&self) -> PathBuf {
        self.resolve(&self.config.dataset.store)
    }

    pub fn pairs_path(&self) -> PathBuf {
        self.output_dir().join("pairs.jsonl")
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.output_dir().join("trials.jsonl")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.output_dir().join("reports")
    }

    /// The retrieval-index section, required by `build-index` and by runs
    /// that include the retrieval-augmented strategy.
    pub fn index_section(&self) -> Result<&IndexSection> {
        self.config
            .index
            .as_ref()
            .context("config has no [index] section")
    }

    pub fn index_dir(&self) -> Result<PathBuf> {
        let section = self.index_section()?;
        Ok(match &section.dir {
            Some(dir) => self.resolve(dir),
            None => self.output_dir().join(format!("index-{}", section.field)),
        })
    }

    /// Hash of the effective config (after flag overrides), recorded in
    /// every manifest so artifacts can be traced to the exact settings that
    /// produced them.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.config).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        hex_string(&hasher.finalize())
    }

    /// Checks everything that does not require touching the provider:
    /// grid shape, threshold range, provider completeness, strategy
    /// resources, and that referenced input paths exist.
    pub fn validate(&self, needs: Needs) -> Result<()> {
        let config = &self.config;
        config.dataset.spec().validate()?;
        ensure!(
            (0.0..=1.0).contains(&config.run.error_rate_threshold),
            "error_rate_threshold {} must lie in [0, 1]",
            config.run.error_rate_threshold
        );
        ensure!(!config.run.strategies.is_empty(), "run.strategies must not be empty");
        if config.provider.kind == ProviderKind::Http {
            ensure!(
                config.provider.endpoint.is_some(),
                "provider.kind = \"http\" requires provider.endpoint"
            );
        }
        if let Some(section) = &config.index {
            ensure!(section.years[0] <= section.years[1], "index.years must be ordered");
            ensure!(section.per_year >= 1, "index.per_year must be >= 1");
            ensure!(section.k >= 1, "index.k must be >= 1");
            ensure!(section.dimension >= 1, "index.dimension must be >= 1");
        }
        if config.run.strategies.contains(&StrategyId::TwoShot) {
            let exemplars = config
                .run
                .two_shot_exemplars
                .as_ref()
                .context("two_shot requires [run.two_shot_exemplars]")?;
            let inside_grid = config.dataset.fields.contains(&exemplars.field)
                && config.dataset.start_years.contains(&exemplars.start_year)
                && config.dataset.year_gaps.contains(&exemplars.year_gap);
            ensure!(
                !inside_grid,
                "exemplar cell {}/{}/gap={} overlaps the evaluation grid; pick a held-out cell",
                exemplars.field,
                exemplars.start_year,
                exemplars.year_gap
            );
        }
        if config.run.strategies.contains(&StrategyId::RagNovelty) {
            let Some(section) = &config.index else {
                bail!("rag_novelty requires an [index] section");
            };
            ensure!(
                config.dataset.fields == [section.field],
                "rag_novelty judges only the indexed field; set dataset.fields = [\"{}\"]",
                section.field
            );
        }
        if needs.store {
            let store = self.store_path();
            ensure!(store.is_file(), "corpus store {} does not exist", store.display());
        }
        if needs.pairs {
            let pairs = self.pairs_path();
            ensure!(
                pairs.is_file(),
                "pair dataset {} does not exist; run `novbench sample` first",
                pairs.display()
            );
        }
        if needs.index && config.run.strategies.contains(&StrategyId::RagNovelty) {
            let dir = self.index_dir()?;
            ensure!(
                dir.join("manifest.json").is_file(),
                "retrieval index {} does not exist; run `novbench build-index` first",
                dir.display()
            );
        }
        Ok(())
    }
}

/// Which referenced paths a command actually reads, and must therefore
/// exist at validation time.
#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub store: bool,
    pub pairs: bool,
    pub index: bool,
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for byte in bytes {
        use std::fmt::Write as _;
        write!(out, "{byte:02x}").expect("write to string");
    }
    out
}

/// Parses a comma-separated strategy list from a flag.
pub fn parse_strategy_list(raw: &str) -> Result<Vec<StrategyId>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            StrategyId::parse(name).with_context(|| {
                let known: Vec<&str> = StrategyId::ALL.iter().map(StrategyId::as_str).collect();
                format!("unknown strategy '{name}' (known: {})", known.join(", "))
            })
        })
        .collect()
}
