//! Exact top-k retrieval under a temporal cutoff.

use chrono::NaiveDate;

use super::{cosine_similarity, date_from_days, days_since_epoch, EmbeddingVector, Index, IndexError};
use crate::corpus::PaperRecord;
use crate::parallel;

/// Default number of neighbors when a run does not configure k.
pub const DEFAULT_TOP_K: usize = 10;

/// One retrieved neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub paper_id: String,
    pub score: f64,
    pub published_date: NaiveDate,
}

/// Ranked hits plus the aggregates the retrieval-augmented prompt consumes.
/// Both aggregates are `None` exactly when no entry was eligible.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub hits: Vec<RetrievalHit>,
    pub avg_cosine: Option<f64>,
    pub avg_date: Option<NaiveDate>,
}

impl RetrievalResult {
    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// The retrieval cutoff for a pair: the later of the two publication dates,
/// used for BOTH papers' retrievals so the two sides see the same horizon.
pub fn pair_cutoff(paper_x: &PaperRecord, paper_y: &PaperRecord) -> NaiveDate {
    paper_x.published_date.max(paper_y.published_date)
}

fn assemble(mut scored: Vec<(f64, usize)>, index: &Index, k: usize) -> RetrievalResult {
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| index.entries()[a.1].paper_id.cmp(&index.entries()[b.1].paper_id))
    });
    scored.truncate(k);
    let hits: Vec<RetrievalHit> = scored
        .into_iter()
        .map(|(score, i)| {
            let entry = &index.entries()[i];
            RetrievalHit {
                paper_id: entry.paper_id.clone(),
                score,
                published_date: entry.published_date,
            }
        })
        .collect();
    let (avg_cosine, avg_date) = aggregates(&hits);
    RetrievalResult { hits, avg_cosine, avg_date }
}

/// Recomputes the aggregate statistics from a hit list: arithmetic mean of
/// scores, and the floor of the mean of dates expressed as days since
/// 1970-01-01.
pub fn aggregates(hits: &[RetrievalHit]) -> (Option<f64>, Option<NaiveDate>) {
    if hits.is_empty() {
        return (None, None);
    }
    let n = hits.len();
    let avg_cosine = hits.iter().map(|h| h.score).sum::<f64>() / n as f64;
    let day_sum: i64 = hits.iter().map(|h| days_since_epoch(h.published_date)).sum();
    let avg_date = date_from_days(day_sum.div_euclid(n as i64));
    (Some(avg_cosine), Some(avg_date))
}

/// Exact top-k scan: scores every entry dated on or before `cutoff`, ranks by
/// cosine descending with ties broken by ascending paper id, and returns at
/// most `k` hits (all eligible entries when fewer than `k` qualify).
///
/// The scoring scan runs data-parallel when the `parallel` feature is on;
/// [`retrieve_topk_sequential`] is the single-threaded equivalent and returns
/// identical results.
pub fn retrieve_topk(
    index: &Index,
    query: &EmbeddingVector,
    k: usize,
    cutoff: NaiveDate,
) -> Result<RetrievalResult, IndexError> {
    check_query(index, query, k)?;
    let indices: Vec<usize> = (0..index.entries().len()).collect();
    let scored = parallel::map_collect(&indices, |&i| {
        let entry = &index.entries()[i];
        if entry.published_date > cutoff {
            return None;
        }
        let score = cosine_similarity(query, &entry.vector).expect("dimensions checked");
        Some((score, i))
    });
    Ok(assemble(scored.into_iter().flatten().collect(), index, k))
}

/// Single-threaded [`retrieve_topk`].
pub fn retrieve_topk_sequential(
    index: &Index,
    query: &EmbeddingVector,
    k: usize,
    cutoff: NaiveDate,
) -> Result<RetrievalResult, IndexError> {
    check_query(index, query, k)?;
    let mut scored = Vec::new();
    for (i, entry) in index.entries().iter().enumerate() {
        if entry.published_date > cutoff {
            continue;
        }
        let score = cosine_similarity(query, &entry.vector)?;
        scored.push((score, i));
    }
    Ok(assemble(scored, index, k))
}

fn check_query(index: &Index, query: &EmbeddingVector, k: usize) -> Result<(), IndexError> {
    if k < 1 {
        return Err(IndexError::InvalidK);
    }
    if query.dimension() != index.manifest().dimension {
        return Err(IndexError::DimensionMismatch {
            expected: index.manifest().dimension,
            actual: query.dimension(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Field;
    use crate::index::{store::IndexEntry, Index};
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn entry(id: &str, vector: Vec<f32>, published: NaiveDate) -> IndexEntry {
        IndexEntry {
            paper_id: id.to_string(),
            vector: EmbeddingVector::normalized(vector).unwrap(),
            published_date: published,
            field: Field::Cs,
        }
    }

    fn small_index() -> Index {
        Index::from_entries(
            "test-model",
            Field::Cs,
            vec![
                entry("a", vec![1.0, 0.0], date(2019, 1, 1)),
                entry("b", vec![0.9, 0.1], date(2020, 6, 1)),
                entry("c", vec![0.0, 1.0], date(2021, 1, 1)),
                entry("d", vec![0.8, 0.2], date(2022, 1, 1)),
                entry("e", vec![0.7, 0.3], date(2023, 1, 1)),
            ],
        )
        .unwrap()
    }

    fn unit_x() -> EmbeddingVector {
        EmbeddingVector::new(vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn cutoff_filters_before_ranking() {
        let index = small_index();
        let result = retrieve_topk(&index, &unit_x(), 10, date(2021, 6, 1)).unwrap();
        let ids: Vec<_> = result.hits.iter().map(|h| h.paper_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(result.hits.iter().all(|h| h.published_date <= date(2021, 6, 1)));
    }

    #[test]
    fn cutoff_is_inclusive() {
        let index = small_index();
        let result = retrieve_topk(&index, &unit_x(), 10, date(2021, 1, 1)).unwrap();
        assert!(result.hits.iter().any(|h| h.paper_id == "c"));
    }

    #[test]
    fn zero_eligible_entries_flags_empty() {
        let index = small_index();
        let result = retrieve_topk(&index, &unit_x(), 5, date(2018, 1, 1)).unwrap();
        assert!(result.is_empty());
        assert_eq!(result.avg_cosine, None);
        assert_eq!(result.avg_date, None);
    }

    #[test]
    fn equal_scores_tie_break_by_ascending_id() {
        let index = Index::from_entries(
            "test-model",
            Field::Cs,
            vec![
                entry("z", vec![1.0, 0.0], date(2020, 1, 1)),
                entry("m", vec![1.0, 0.0], date(2020, 2, 1)),
                entry("a", vec![1.0, 0.0], date(2020, 3, 1)),
            ],
        )
        .unwrap();
        let result = retrieve_topk(&index, &unit_x(), 3, date(2024, 1, 1)).unwrap();
        let ids: Vec<_> = result.hits.iter().map(|h| h.paper_id.as_str()).collect();
        assert_eq!(ids, ["a", "m", "z"]);
    }

    #[test]
    fn avg_date_floors_the_day_mean() {
        let hits = vec![
            RetrievalHit { paper_id: "a".into(), score: 0.5, published_date: date(2020, 1, 1) },
            RetrievalHit { paper_id: "b".into(), score: 0.7, published_date: date(2022, 1, 1) },
        ];
        let (avg_cosine, avg_date) = aggregates(&hits);
        assert!((avg_cosine.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(avg_date.unwrap(), date(2020, 12, 31));
        let even = vec![
            RetrievalHit { paper_id: "a".into(), score: 0.5, published_date: date(2021, 1, 1) },
            RetrievalHit { paper_id: "b".into(), score: 0.7, published_date: date(2023, 1, 1) },
        ];
        assert_eq!(aggregates(&even).1.unwrap(), date(2022, 1, 1));
    }

    #[test]
    fn pair_cutoff_is_the_later_date_symmetrically() {
        let x = PaperRecord::new("x", "T", "A", Field::Cs, date(2023, 5, 1)).unwrap();
        let y = PaperRecord::new("y", "T", "A", Field::Cs, date(2013, 5, 1)).unwrap();
        assert_eq!(pair_cutoff(&x, &y), date(2023, 5, 1));
        assert_eq!(pair_cutoff(&y, &x), date(2023, 5, 1));
        let same = PaperRecord::new("z", "T", "A", Field::Cs, date(2023, 5, 1)).unwrap();
        assert_eq!(pair_cutoff(&x, &same), date(2023, 5, 1));
    }

    #[test]
    fn k_zero_and_dimension_mismatch_are_errors() {
        let index = small_index();
        assert!(matches!(
            retrieve_topk(&index, &unit_x(), 0, date(2024, 1, 1)),
            Err(IndexError::InvalidK)
        ));
        let wide = EmbeddingVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            retrieve_topk(&index, &wide, 3, date(2024, 1, 1)),
            Err(IndexError::DimensionMismatch { .. })
        ));
    }

    prop_compose! {
        fn arb_index_and_query()(
            n in 1usize..60,
            dim in 2usize..6,
            seed in any::<u64>(),
        )(
            vectors in proptest::collection::vec(
                proptest::collection::vec(-1.0f32..1.0, dim).prop_filter(
                    "nonzero",
                    |v| v.iter().any(|x| x.abs() > 1e-3),
                ),
                n + 1,
            ),
            days in proptest::collection::vec(0i64..20000, n),
            _seed in Just(seed),
        ) -> (Index, EmbeddingVector, Vec<i64>) {
            let mut entries = Vec::new();
            for (i, (v, d)) in vectors.iter().skip(1).zip(&days).enumerate() {
                entries.push(IndexEntry {
                    paper_id: format!("p{i:03}"),
                    vector: EmbeddingVector::normalized(v.clone()).unwrap(),
                    published_date: date_from_days(*d),
                    field: Field::Cs,
                });
            }
            let index = Index::from_entries("prop-model", Field::Cs, entries).unwrap();
            let query = EmbeddingVector::normalized(vectors[0].clone()).unwrap();
            (index, query, days)
        }
    }

    proptest! {
        #[test]
        fn temporal_safety_holds_under_adversarial_dates(
            (index, query, days) in arb_index_and_query(),
            cutoff_day in 0i64..20000,
            k in 1usize..20,
        ) {
            let cutoff = date_from_days(cutoff_day);
            let result = retrieve_topk(&index, &query, k, cutoff).unwrap();
            prop_assert!(result.hits.iter().all(|h| h.published_date <= cutoff));
            let eligible = days.iter().filter(|&&d| d <= cutoff_day).count();
            prop_assert_eq!(result.hits.len(), eligible.min(k));
        }

        #[test]
        fn enlarging_k_never_drops_a_hit(
            (index, query, _days) in arb_index_and_query(),
            k in 1usize..15,
            extra in 1usize..10,
            cutoff_day in 0i64..20000,
        ) {
            let cutoff = date_from_days(cutoff_day);
            let small = retrieve_topk(&index, &query, k, cutoff).unwrap();
            let large = retrieve_topk(&index, &query, k + extra, cutoff).unwrap();
            prop_assert!(large.hits.len() >= small.hits.len());
            for (a, b) in small.hits.iter().zip(&large.hits) {
                prop_assert_eq!(&a.paper_id, &b.paper_id);
                prop_assert_eq!(a.score, b.score);
            }
        }

        #[test]
        fn aggregates_match_recomputation(
            (index, query, _days) in arb_index_and_query(),
            k in 1usize..20,
            cutoff_day in 0i64..20000,
        ) {
            let result = retrieve_topk(&index, &query, k, date_from_days(cutoff_day)).unwrap();
            let (avg_cosine, avg_date) = aggregates(&result.hits);
            prop_assert_eq!(result.avg_cosine, avg_cosine);
            prop_assert_eq!(result.avg_date, avg_date);
        }

        #[test]
        fn parallel_and_sequential_scans_agree(
            (index, query, _days) in arb_index_and_query(),
            k in 1usize..20,
            cutoff_day in 0i64..20000,
        ) {
            let cutoff = date_from_days(cutoff_day);
            let par = retrieve_topk(&index, &query, k, cutoff).unwrap();
            let seq = retrieve_topk_sequential(&index, &query, k, cutoff).unwrap();
            prop_assert_eq!(par, seq);
        }
    }
}
