//! Patent corpus ingestion, validation, and serialization.
//!
//! Replaces a spreadsheet-and-macros preparation step with native CSV/JSONL
//! ingestion. Rows that violate the record invariants are reported, never
//! silently dropped; duplicate patent numbers keep the first occurrence.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Upper bound for a single text field; oversize rows are rejected.
pub const MAX_FIELD_BYTES: usize = 1 << 20;

/// One patent's identity and text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRecord {
    /// Publication identifier, e.g. "US20240120514A1". Non-empty, no whitespace.
    pub patent_number: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    /// Full claims text, newline-separated clauses.
    pub claims: String,
}

impl PatentRecord {
    /// Checks the record invariants, returning a reason that names the
    /// offending field.
    pub fn validate(&self) -> Result<(), String> {
        if self.patent_number.trim().is_empty() {
            return Err("patent_number: empty".into());
        }
        if self.patent_number.chars().any(char::is_whitespace) {
            return Err("patent_number: contains whitespace".into());
        }
        for (name, value) in [
            ("title", &self.title),
            ("abstract", &self.abstract_text),
            ("claims", &self.claims),
        ] {
            if value.trim().is_empty() {
                return Err(format!("{name}: empty"));
            }
            if value.len() > MAX_FIELD_BYTES {
                return Err(format!(
                    "{name}: exceeds the {MAX_FIELD_BYTES}-byte field cap ({} bytes)",
                    value.len()
                ));
            }
        }
        if self.patent_number.len() > MAX_FIELD_BYTES {
            return Err("patent_number: exceeds the field cap".into());
        }
        Ok(())
    }
}

/// A data row that failed validation, with its 1-based data-row index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub row: usize,
    pub reason: String,
}

/// Outcome of a corpus load. `accepted + rejected.len() + duplicates_dropped`
/// equals the number of data rows read.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLoadReport {
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
    pub duplicates_dropped: usize,
}

/// Supported corpus serializations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing required column(s): {}", columns.join(", "))]
    MissingHeader { columns: Vec<String> },
    #[error("source is not valid UTF-8: {0}")]
    Encoding(#[from] std::str::Utf8Error),
    #[error("source contains no header and no data rows")]
    EmptySource,
}

const REQUIRED_COLUMNS: [&str; 4] = ["patent_number", "title", "abstract", "claims"];

/// Parses a corpus from raw bytes. Record order follows source order; on a
/// duplicate patent_number the first occurrence wins.
pub fn parse_corpus(
    source: &[u8],
    format: CorpusFormat,
) -> Result<(Vec<PatentRecord>, CorpusLoadReport), CorpusError> {
    let source = source.strip_prefix(b"\xef\xbb\xbf").unwrap_or(source);
    let text = std::str::from_utf8(source)?;
    if text.trim().is_empty() {
        return Err(CorpusError::EmptySource);
    }
    match format {
        CorpusFormat::Csv => parse_csv(text),
        CorpusFormat::Jsonl => parse_jsonl(text),
    }
}

fn parse_csv(text: &str) -> Result<(Vec<PatentRecord>, CorpusLoadReport), CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|_| CorpusError::EmptySource)?
        .clone();
    let mut column_index = [usize::MAX; 4];
    for (pos, name) in headers.iter().enumerate() {
        let normalized = name.trim().to_lowercase();
        if let Some(slot) = REQUIRED_COLUMNS.iter().position(|c| *c == normalized) {
            if column_index[slot] == usize::MAX {
                column_index[slot] = pos;
            }
        }
    }
    let missing: Vec<String> = REQUIRED_COLUMNS
        .iter()
        .zip(column_index)
        .filter(|(_, idx)| *idx == usize::MAX)
        .map(|(name, _)| (*name).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingHeader { columns: missing });
    }

    let mut records = Vec::new();
    let mut report = CorpusLoadReport::default();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_index = i + 1;
        match row {
            Ok(row) => {
                let cell = |slot: usize| row.get(column_index[slot]).map(str::to_string);
                let candidate = (cell(0), cell(1), cell(2), cell(3));
                match candidate {
                    (Some(patent_number), Some(title), Some(abstract_text), Some(claims)) => {
                        let record = PatentRecord {
                            patent_number,
                            title,
                            abstract_text,
                            claims,
                        };
                        admit(record, row_index, &mut records, &mut report, &mut seen);
                    }
                    _ => {
                        let first_absent = REQUIRED_COLUMNS
                            .iter()
                            .zip(column_index)
                            .find(|(_, idx)| row.get(*idx).is_none())
                            .map(|(name, _)| *name)
                            .unwrap_or("unknown");
                        report.rejected.push(RejectedRow {
                            row: row_index,
                            reason: format!("{first_absent}: cell missing from row"),
                        });
                    }
                }
            }
            Err(e) => report.rejected.push(RejectedRow {
                row: row_index,
                reason: format!("malformed CSV row: {e}"),
            }),
        }
    }
    Ok((records, report))
}

fn parse_jsonl(text: &str) -> Result<(Vec<PatentRecord>, CorpusLoadReport), CorpusError> {
    let mut records = Vec::new();
    let mut report = CorpusLoadReport::default();
    let mut seen = HashSet::new();
    let mut row_index = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        row_index += 1;
        match serde_json::from_str::<PatentRecord>(line) {
            Ok(record) => admit(record, row_index, &mut records, &mut report, &mut seen),
            Err(e) => report.rejected.push(RejectedRow {
                row: row_index,
                reason: format!("invalid JSON object: {e}"),
            }),
        }
    }
    Ok((records, report))
}

fn admit(
    record: PatentRecord,
    row_index: usize,
    records: &mut Vec<PatentRecord>,
    report: &mut CorpusLoadReport,
    seen: &mut HashSet<String>,
) {
    match record.validate() {
        Ok(()) => {
            if seen.insert(record.patent_number.clone()) {
                records.push(record);
                report.accepted += 1;
            } else {
                report.duplicates_dropped += 1;
            }
        }
        Err(reason) => report.rejected.push(RejectedRow {
            row: row_index,
            reason,
        }),
    }
}

/// Serializes records; `parse_corpus(write_corpus(R))` yields exactly `R`.
pub fn write_corpus(records: &[PatentRecord], format: CorpusFormat) -> Vec<u8> {
    match format {
        CorpusFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(REQUIRED_COLUMNS)
                .expect("in-memory CSV write");
            for record in records {
                writer
                    .write_record([
                        &record.patent_number,
                        &record.title,
                        &record.abstract_text,
                        &record.claims,
                    ])
                    .expect("in-memory CSV write");
            }
            writer.into_inner().expect("in-memory CSV flush")
        }
        CorpusFormat::Jsonl => {
            let mut out = Vec::new();
            for record in records {
                let line = serde_json::to_string(record).expect("record serialization");
                out.extend_from_slice(line.as_bytes());
                out.push(b'\n');
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN_CSV: &str = "patent_number,title,abstract,claims\n\
        US20240120514A1,Fuel cell leak detection,Detects hydrogen leaks.,1. A fuel cell system.\n";

    #[test]
    fn single_row_parses() {
        let (records, report) = parse_corpus(GOLDEN_CSV.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].patent_number, "US20240120514A1");
        assert_eq!(report.accepted, 1);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn header_only_gives_empty_list() {
        let src = "patent_number,title,abstract,claims\n";
        let (records, report) = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert!(records.is_empty());
        assert_eq!(report.accepted, 0);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn blank_claims_cell_is_rejected_naming_claims() {
        let src = "patent_number,title,abstract,claims\nUS1,Title,Abstract,\n";
        let (records, report) = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert!(records.is_empty());
        assert_eq!(report.rejected.len(), 1);
        assert!(report.rejected[0].reason.contains("claims"));
    }

    #[test]
    fn duplicate_patent_number_first_wins() {
        let src = "patent_number,title,abstract,claims\n\
            US1,First,A,C\nUS2,Other,A,C\nUS3,Other,A,C\nUS4,Other,A,C\nUS1,Second,A,C\n";
        let (records, report) = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(records[0].title, "First");
        assert_eq!(report.duplicates_dropped, 1);
        assert_eq!(report.accepted, 4);
    }

    #[test]
    fn missing_header_column_is_an_error() {
        let src = "patent_number,title,abstract\nUS1,T,A\n";
        let err = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap_err();
        match err {
            CorpusError::MissingHeader { columns } => assert_eq!(columns, vec!["claims"]),
            other => panic!("expected MissingHeader, got {other:?}"),
        }
    }

    #[test]
    fn header_matching_is_case_insensitive_and_trimmed() {
        let src = " Patent_Number , TITLE ,Abstract, Claims \nUS1,T,A,C\n";
        let (records, _) = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn invalid_utf8_is_an_encoding_error() {
        let src = b"patent_number,title,abstract,claims\nUS1,T,\xff\xfe,C\n";
        assert!(matches!(
            parse_corpus(src, CorpusFormat::Csv),
            Err(CorpusError::Encoding(_))
        ));
    }

    #[test]
    fn empty_source_is_an_error_in_both_formats() {
        assert!(matches!(
            parse_corpus(b"", CorpusFormat::Csv),
            Err(CorpusError::EmptySource)
        ));
        assert!(matches!(
            parse_corpus(b"  \n ", CorpusFormat::Jsonl),
            Err(CorpusError::EmptySource)
        ));
    }

    #[test]
    fn whitespace_in_patent_number_is_rejected() {
        let src = "patent_number,title,abstract,claims\nUS 1,T,A,C\n";
        let (records, report) = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert!(records.is_empty());
        assert!(report.rejected[0].reason.contains("patent_number"));
    }

    #[test]
    fn oversize_field_is_rejected_with_sizing_reason() {
        let big = "x".repeat(MAX_FIELD_BYTES + 1);
        let src = format!("patent_number,title,abstract,claims\nUS1,T,{big},C\n");
        let (records, report) = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert!(records.is_empty());
        assert!(report.rejected[0].reason.contains("field cap"));
    }

    #[test]
    fn jsonl_roundtrip_and_rejects() {
        let records = vec![PatentRecord {
            patent_number: "US1".into(),
            title: "T".into(),
            abstract_text: "Multi\nline, \"quoted\"".into(),
            claims: "C".into(),
        }];
        let bytes = write_corpus(&records, CorpusFormat::Jsonl);
        let (parsed, report) = parse_corpus(&bytes, CorpusFormat::Jsonl).unwrap();
        assert_eq!(parsed, records);
        assert!(report.rejected.is_empty());

        let src = "{\"patent_number\":\"US1\",\"title\":\"T\",\"abstract\":\"A\",\"claims\":\"C\"}\nnot json\n";
        let (parsed, report) = parse_corpus(src.as_bytes(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].row, 2);
    }

    #[test]
    fn jsonl_empty_write_is_empty_stream() {
        assert!(write_corpus(&[], CorpusFormat::Jsonl).is_empty());
    }

    #[test]
    fn csv_empty_write_is_header_only() {
        let bytes = write_corpus(&[], CorpusFormat::Csv);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "patent_number,title,abstract,claims\n"
        );
    }

    #[test]
    fn csv_roundtrip_with_awkward_characters() {
        let records = vec![PatentRecord {
            patent_number: "US1".into(),
            title: "Comma, quote \" and\nnewline".into(),
            abstract_text: "plain".into(),
            claims: "1. x\n2. y".into(),
        }];
        let bytes = write_corpus(&records, CorpusFormat::Csv);
        let (parsed, report) = parse_corpus(&bytes, CorpusFormat::Csv).unwrap();
        assert_eq!(parsed, records);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn conservation_holds_on_mixed_input() {
        let src = "patent_number,title,abstract,claims\n\
            US1,T,A,C\n\
            ,T,A,C\n\
            US1,T2,A,C\n\
            US2,T,,C\n";
        let (records, report) = parse_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(
            report.accepted + report.rejected.len() + report.duplicates_dropped,
            4
        );
    }
}
