//! Parsing of raw metadata snapshots into a [`CorpusStore`].
//!
//! The input is newline-delimited JSON in the public arXiv snapshot layout:
//! `id`, `title`, `abstract`, a space-separated `categories` string, and a
//! `versions` list whose first entry carries the original submission
//! timestamp. Records that cannot be parsed are skipped and counted;
//! records whose primary category falls outside the six covered fields are
//! dropped and counted separately; an unreadable source is a fatal error.

use std::io::{BufRead, Write};

use chrono::DateTime;
use serde::Deserialize;

use super::{CorpusError, CorpusStore, Field, PaperRecord};

/// Counters reported by [`ingest_metadata`].
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct IngestStats {
    /// Records stored.
    pub ingested: u64,
    /// Lines that failed to parse or violated a record invariant.
    pub skipped_malformed: u64,
    /// Well-formed records whose primary category is outside the six fields.
    pub dropped_out_of_field: u64,
}

#[derive(Deserialize)]
struct RawVersion {
    created: String,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    categories: String,
    versions: Vec<RawVersion>,
    #[serde(default)]
    authors_parsed: Option<Vec<Vec<String>>>,
    #[serde(default)]
    tldr: Option<String>,
    #[serde(default)]
    affiliation: Option<String>,
}

enum LineOutcome {
    Stored(PaperRecord),
    Malformed,
    OutOfField,
}

fn parse_line(line: &str) -> LineOutcome {
    let raw: RawRecord = match serde_json::from_str(line) {
        Ok(raw) => raw,
        Err(_) => return LineOutcome::Malformed,
    };
    let primary = match raw.categories.split_whitespace().next() {
        Some(primary) => primary,
        None => return LineOutcome::Malformed,
    };
    let field = match Field::from_category(primary) {
        Some(field) => field,
        None => return LineOutcome::OutOfField,
    };
    let first_version = match raw.versions.first() {
        Some(v) => v,
        None => return LineOutcome::Malformed,
    };
    let published_date = match DateTime::parse_from_rfc2822(&first_version.created) {
        Ok(ts) => ts.date_naive(),
        Err(_) => return LineOutcome::Malformed,
    };
    let record = match PaperRecord::new(raw.id, &raw.title, &raw.abstract_text, field, published_date)
    {
        Ok(record) => record,
        Err(_) => return LineOutcome::Malformed,
    };
    let record = match raw.authors_parsed {
        Some(parsed) => record.with_authors(render_authors(&parsed)),
        None => record,
    };
    let record = match raw.tldr.as_deref() {
        Some(tldr) if !tldr.trim().is_empty() => record.with_tldr(tldr),
        _ => record,
    };
    match raw.affiliation.as_deref() {
        Some(aff) if !aff.trim().is_empty() => LineOutcome::Stored(record.with_affiliation(aff)),
        _ => LineOutcome::Stored(record),
    }
}

/// Renders `authors_parsed` entries (`[keyname, firstname, suffix]`) as
/// display names.
fn render_authors(parsed: &[Vec<String>]) -> Vec<String> {
    parsed
        .iter()
        .map(|parts| {
            let keyname = parts.first().map(String::as_str).unwrap_or("");
            let firstname = parts.get(1).map(String::as_str).unwrap_or("");
            super::normalize_text(&format!("{firstname} {keyname}"))
        })
        .filter(|name| !name.is_empty())
        .collect()
}

/// Reads a raw metadata stream into a fresh store.
///
/// Ingestion is a pure function of the stream contents: the same stream
/// always yields a store with the same digest.
pub fn ingest_metadata(reader: impl BufRead) -> Result<(CorpusStore, IngestStats), CorpusError> {
    let mut store = CorpusStore::new();
    let mut stats = IngestStats::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            LineOutcome::Stored(record) => {
                store.insert(record);
                stats.ingested += 1;
            }
            LineOutcome::Malformed => stats.skipped_malformed += 1,
            LineOutcome::OutOfField => stats.dropped_out_of_field += 1,
        }
    }
    Ok((store, stats))
}

/// Writes a store as newline-delimited normalized records, in deterministic
/// order.
pub fn save_records(store: &CorpusStore, mut writer: impl Write) -> Result<(), CorpusError> {
    for record in store.records() {
        let line = serde_json::to_string(record).expect("record serializes");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads a store previously written by [`save_records`]. Unlike raw
/// ingestion this is strict: a malformed line is an error, not a skip.
pub fn load_store(reader: impl BufRead) -> Result<CorpusStore, CorpusError> {
    let mut store = CorpusStore::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PaperRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedStore {
                line: idx + 1,
                message: e.to_string(),
            })?;
        store.insert(record);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn raw_line(id: &str, category: &str, abstract_text: &str, created: &str) -> String {
        serde_json::json!({
            "id": id,
            "title": format!("Title {id}"),
            "abstract": abstract_text,
            "categories": category,
            "versions": [{"version": "v1", "created": created}],
        })
        .to_string()
    }

    #[test]
    fn mixed_stream_counts_stored_and_skipped() {
        let lines = [
            raw_line("cs/1", "cs.CL cs.AI", "An abstract.", "Mon, 2 Apr 2018 19:18:42 GMT"),
            raw_line("cs/2", "cs.LG", "Another abstract.", "Tue, 3 Apr 2018 09:00:00 GMT"),
            raw_line("cs/3", "cs.CV", "Third abstract.", "Wed, 4 Apr 2018 09:00:00 GMT"),
            raw_line("cs/4", "cs.CV", "   ", "Wed, 4 Apr 2018 09:00:00 GMT"),
        ];
        let input = lines.join("\n");
        let (store, stats) = ingest_metadata(Cursor::new(input)).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(stats.ingested, 3);
        assert_eq!(stats.skipped_malformed, 1);
        assert_eq!(stats.dropped_out_of_field, 0);
    }

    #[test]
    fn out_of_field_is_dropped_not_skipped() {
        let lines = [
            raw_line("econ/1", "econ.EM", "Economics abstract.", "Mon, 2 Apr 2018 19:18:42 GMT"),
            raw_line("eess/1", "eess.SP", "Signals abstract.", "Mon, 2 Apr 2018 19:18:42 GMT"),
            raw_line("stat/1", "stat.ME", "Stats abstract.", "Mon, 2 Apr 2018 19:18:42 GMT"),
        ];
        let input = lines.join("\n");
        let (store, stats) = ingest_metadata(Cursor::new(input)).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(stats.dropped_out_of_field, 2);
        assert_eq!(stats.skipped_malformed, 0);
    }

    #[test]
    fn published_date_comes_from_first_version() {
        let line = serde_json::json!({
            "id": "cs/10",
            "title": "T",
            "abstract": "A",
            "categories": "cs.CL",
            "versions": [
                {"version": "v1", "created": "Mon, 2 Apr 2018 19:18:42 GMT"},
                {"version": "v2", "created": "Fri, 1 Mar 2019 10:00:00 GMT"},
            ],
        })
        .to_string();
        let (store, _) = ingest_metadata(Cursor::new(line)).unwrap();
        let record = &store.bucket(Field::Cs, 2018)[0];
        assert_eq!(record.published_date.to_string(), "2018-04-02");
        assert_eq!(record.published_year, 2018);
    }

    #[test]
    fn unparseable_json_and_bad_dates_are_skipped() {
        let lines = [
            "{not json".to_string(),
            raw_line("cs/1", "cs.CL", "A.", "not a timestamp"),
            serde_json::json!({"id": "cs/2", "title": "T", "abstract": "A", "categories": "cs.CL", "versions": []}).to_string(),
        ];
        let input = lines.join("\n");
        let (store, stats) = ingest_metadata(Cursor::new(input)).unwrap();
        assert_eq!(store.len(), 0);
        assert_eq!(stats.skipped_malformed, 3);
    }

    #[test]
    fn ingest_is_deterministic_across_runs() {
        let lines = [
            raw_line("cs/1", "cs.CL", "A one.", "Mon, 2 Apr 2018 19:18:42 GMT"),
            raw_line("math/1", "math.CO", "A two.", "Tue, 3 Apr 2018 09:00:00 GMT"),
        ];
        let input = lines.join("\n");
        let (s1, _) = ingest_metadata(Cursor::new(input.clone())).unwrap();
        let (s2, _) = ingest_metadata(Cursor::new(input)).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.digest(), s2.digest());
    }

    #[test]
    fn save_then_load_round_trips() {
        let lines = [
            raw_line("cs/1", "cs.CL", "A one.", "Mon, 2 Apr 2018 19:18:42 GMT"),
            raw_line("q-bio/1", "q-bio.GN", "A two.", "Tue, 3 Apr 2018 09:00:00 GMT"),
        ];
        let (store, _) = ingest_metadata(Cursor::new(lines.join("\n"))).unwrap();
        let mut buf = Vec::new();
        save_records(&store, &mut buf).unwrap();
        let loaded = load_store(Cursor::new(buf)).unwrap();
        assert_eq!(store, loaded);
    }

    #[test]
    fn load_store_rejects_malformed_lines() {
        let err = load_store(Cursor::new("{broken")).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedStore { line: 1, .. }));
    }

    #[test]
    fn authors_tldr_affiliation_carry_through() {
        let line = serde_json::json!({
            "id": "cs/20",
            "title": "T",
            "abstract": "A",
            "categories": "cs.CL",
            "versions": [{"version": "v1", "created": "Mon, 2 Apr 2018 19:18:42 GMT"}],
            "authors_parsed": [["Curie", "Marie", ""], ["Noether", "Emmy", ""]],
            "tldr": "  Short   summary. ",
            "affiliation": "Institute of Testing",
        })
        .to_string();
        let (store, _) = ingest_metadata(Cursor::new(line)).unwrap();
        let record = &store.bucket(Field::Cs, 2018)[0];
        assert_eq!(
            record.authors.as_deref().unwrap(),
            ["Marie Curie".to_string(), "Emmy Noether".to_string()]
        );
        assert_eq!(record.tldr.as_deref(), Some("Short summary."));
        assert_eq!(record.affiliation.as_deref(), Some("Institute of Testing"));
    }
}
