//! Deterministic sampling: pair-dataset construction and retrieval pools.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, CorpusStore, DatasetSpec, Field, PairSample, PaperRecord};

/// Emitted when a retrieval-pool year holds fewer papers than requested and
/// the whole year was taken instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolWarning {
    pub field: Field,
    pub year: i32,
    pub available: usize,
    pub requested: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a stable per-cell seed so each cell's draw is independent of how
/// many other cells ran before it.
fn cell_seed(base: u64, field: Field, start_year: i32, year_gap: i32) -> u64 {
    let mut s = splitmix64(base ^ 0x5bf0_3635);
    s = splitmix64(s ^ field as u64);
    s = splitmix64(s ^ start_year as u64);
    splitmix64(s ^ year_gap as u64)
}

fn draw_distinct(rng: &mut ChaCha8Rng, pool_len: usize, amount: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, pool_len, amount).into_vec()
}

/// Constructs the pair dataset: for every (field, start_year, year_gap) cell,
/// `samples_per_cell` pairs drawn without replacement on each side, the newer
/// paper from `start_year` and the older from `start_year - year_gap`, each
/// pair labeled with the newer paper's id.
///
/// The draw is a pure function of the store contents and `spec.rng_seed`.
/// A cell whose year buckets cannot supply `samples_per_cell` distinct papers
/// is a fatal error naming that cell.
pub fn sample_dataset(
    store: &CorpusStore,
    spec: &DatasetSpec,
) -> Result<Vec<PairSample>, CorpusError> {
    spec.validate()?;
    let mut pairs = Vec::with_capacity(spec.total_pairs());
    for &field in &spec.fields {
        for &start_year in &spec.start_years {
            for &year_gap in &spec.year_gaps {
                let older_year = start_year - year_gap;
                let newer_pool = store.bucket(field, start_year);
                let older_pool = store.bucket(field, older_year);
                for (year, pool) in [(start_year, newer_pool), (older_year, older_pool)] {
                    if pool.len() < spec.samples_per_cell {
                        return Err(CorpusError::CellUnderpopulated {
                            field,
                            start_year,
                            year_gap,
                            year,
                            available: pool.len(),
                            needed: spec.samples_per_cell,
                        });
                    }
                }
                let mut rng =
                    ChaCha8Rng::seed_from_u64(cell_seed(spec.rng_seed, field, start_year, year_gap));
                let newer_idx = draw_distinct(&mut rng, newer_pool.len(), spec.samples_per_cell);
                let older_idx = draw_distinct(&mut rng, older_pool.len(), spec.samples_per_cell);
                for (&ix, &iy) in newer_idx.iter().zip(&older_idx) {
                    let paper_x = newer_pool[ix].clone();
                    let paper_y = older_pool[iy].clone();
                    let label = paper_x.id.clone();
                    pairs.push(PairSample {
                        field,
                        start_year,
                        year_gap,
                        paper_x,
                        paper_y,
                        label,
                    });
                }
            }
        }
    }
    Ok(pairs)
}

/// Draws a per-field retrieval pool: up to `per_year` papers from every year
/// in `years` (inclusive). A year with fewer papers contributes everything it
/// has and produces a [`PoolWarning`] instead of failing.
pub fn sample_index_pool(
    store: &CorpusStore,
    field: Field,
    years: std::ops::RangeInclusive<i32>,
    per_year: usize,
    seed: u64,
) -> (Vec<PaperRecord>, Vec<PoolWarning>) {
    let mut pool = Vec::new();
    let mut warnings = Vec::new();
    for year in years {
        let bucket = store.bucket(field, year);
        if bucket.is_empty() {
            continue;
        }
        if bucket.len() <= per_year {
            if bucket.len() < per_year {
                warnings.push(PoolWarning {
                    field,
                    year,
                    available: bucket.len(),
                    requested: per_year,
                });
            }
            pool.extend(bucket.iter().cloned());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, field, year, 0));
        let mut idx = draw_distinct(&mut rng, bucket.len(), per_year);
        idx.sort_unstable();
        pool.extend(idx.into_iter().map(|i| bucket[i].clone()));
    }
    (pool, warnings)
}
