//! Corpus file ingestion and export.
//!
//! Two formats are accepted, both UTF-8:
//!
//! * JSONL — one object per line with required `id` and `text` fields and
//!   optional `app`, `store`, `language`, `timestamp` (ISO-8601), and
//!   `gold_label` fields.
//! * CSV — RFC-4180 with a header row carrying the same field names.
//!
//! Malformed records are collected into a rejects report instead of being
//! silently dropped; stream-level problems (undecodable bytes, a missing
//! required column) abort the ingest.

use super::{AnnotationSet, Corpus, Review, StoreKind};
use crate::label::RequirementLabel;
use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use std::io::Read;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("stream is not valid UTF-8")]
    UndecodableStream,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("duplicate review id {0:?}")]
    DuplicateId(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// A record that could not be turned into a review, with the line it
/// came from and why.
#[derive(Debug, Clone, Serialize)]
pub struct RejectedRecord {
    pub line: usize,
    pub raw: String,
    pub reason: String,
}

/// Result of an ingest: the corpus plus the rejects report.
#[derive(Debug)]
pub struct IngestOutcome {
    pub corpus: Corpus,
    pub rejects: Vec<RejectedRecord>,
}

/// On-disk review record. Field names are the file interface; derived
/// counts never appear here.
#[derive(Debug, Serialize, Deserialize)]
struct RawReview {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    app: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    store: Option<StoreKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<DateTime<FixedOffset>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_label: Option<RequirementLabel>,
}

impl From<RawReview> for Review {
    fn from(raw: RawReview) -> Self {
        let mut review = Review::new(raw.id, raw.text);
        review.app_name = raw.app;
        review.store = raw.store.unwrap_or_default();
        review.language = raw.language;
        review.timestamp = raw.timestamp;
        review.gold_label = raw.gold_label;
        review
    }
}

impl From<&Review> for RawReview {
    fn from(review: &Review) -> Self {
        RawReview {
            id: review.id.clone(),
            text: review.text.clone(),
            app: review.app_name.clone(),
            store: match review.store {
                StoreKind::Unknown => None,
                other => Some(other),
            },
            language: review.language.clone(),
            timestamp: review.timestamp,
            gold_label: review.gold_label,
        }
    }
}

/// Reads a corpus from a byte stream in the given format.
pub fn ingest<R: Read>(
    mut source: R,
    format: CorpusFormat,
    provenance: &str,
) -> Result<IngestOutcome, IngestError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let content = String::from_utf8(bytes).map_err(|_| IngestError::UndecodableStream)?;
    match format {
        CorpusFormat::Jsonl => ingest_jsonl(&content, provenance),
        CorpusFormat::Csv => ingest_csv(&content, provenance),
    }
}

fn check_duplicate(seen: &mut std::collections::BTreeSet<String>, id: &str) -> Result<(), IngestError> {
    if !seen.insert(id.to_string()) {
        return Err(IngestError::DuplicateId(id.to_string()));
    }
    Ok(())
}

fn ingest_jsonl(content: &str, provenance: &str) -> Result<IngestOutcome, IngestError> {
    let mut reviews = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawReview>(line) {
            Ok(raw) => {
                if raw.text.trim().is_empty() {
                    rejects.push(RejectedRecord {
                        line: idx + 1,
                        raw: line.to_string(),
                        reason: "empty text".into(),
                    });
                    continue;
                }
                check_duplicate(&mut seen, &raw.id)?;
                reviews.push(Review::from(raw));
            }
            Err(err) => rejects.push(RejectedRecord {
                line: idx + 1,
                raw: line.to_string(),
                reason: err.to_string(),
            }),
        }
    }
    Ok(IngestOutcome {
        corpus: Corpus::new(reviews, provenance),
        rejects,
    })
}

fn ingest_csv(content: &str, provenance: &str) -> Result<IngestOutcome, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(content.as_bytes());

    // Header must carry the required columns up front; per-record
    // problems go to the rejects report instead.
    let headers = reader
        .headers()
        .map_err(|e| IngestError::SchemaMismatch(e.to_string()))?
        .clone();
    for required in ["id", "text"] {
        if !headers.iter().any(|h| h == required) {
            return Err(IngestError::SchemaMismatch(format!(
                "missing required column {required:?}"
            )));
        }
    }

    let mut reviews = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, record) in reader.deserialize::<RawCsvReview>().enumerate() {
        let line = idx + 2; // header is line 1
        match record {
            Ok(raw) => match raw.into_raw_review() {
                Ok(raw) => {
                    if raw.text.trim().is_empty() {
                        rejects.push(RejectedRecord {
                            line,
                            raw: String::new(),
                            reason: "empty text".into(),
                        });
                        continue;
                    }
                    check_duplicate(&mut seen, &raw.id)?;
                    reviews.push(Review::from(raw));
                }
                Err(reason) => rejects.push(RejectedRecord {
                    line,
                    raw: String::new(),
                    reason,
                }),
            },
            Err(err) => rejects.push(RejectedRecord {
                line,
                raw: String::new(),
                reason: err.to_string(),
            }),
        }
    }
    Ok(IngestOutcome {
        corpus: Corpus::new(reviews, provenance),
        rejects,
    })
}

/// CSV rows keep every field textual so that a bad enum value rejects
/// the single record rather than aborting the stream.
#[derive(Debug, Deserialize)]
struct RawCsvReview {
    id: String,
    text: String,
    #[serde(default)]
    app: Option<String>,
    #[serde(default)]
    store: Option<String>,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    timestamp: Option<String>,
    #[serde(default)]
    gold_label: Option<String>,
}

fn non_empty(value: Option<String>) -> Option<String> {
    value.filter(|v| !v.is_empty())
}

impl RawCsvReview {
    fn into_raw_review(self) -> Result<RawReview, String> {
        let store = match non_empty(self.store) {
            None => None,
            Some(s) => Some(
                serde_json::from_value::<StoreKind>(serde_json::Value::String(s.clone()))
                    .map_err(|_| format!("unknown store {s:?}"))?,
            ),
        };
        let timestamp = match non_empty(self.timestamp) {
            None => None,
            Some(t) => Some(
                DateTime::parse_from_rfc3339(&t).map_err(|e| format!("bad timestamp {t:?}: {e}"))?,
            ),
        };
        let gold_label = match non_empty(self.gold_label) {
            None => None,
            Some(l) => Some(l.parse::<RequirementLabel>().map_err(|e| e.to_string())?),
        };
        Ok(RawReview {
            id: self.id,
            text: self.text,
            app: non_empty(self.app),
            store,
            language: non_empty(self.language),
            timestamp,
            gold_label,
        })
    }
}

/// Writes a corpus as JSONL, one review object per line.
pub fn export_jsonl<W: std::io::Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for review in &corpus.reviews {
        let raw = RawReview::from(review);
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes a corpus as CSV with the full header.
pub fn export_csv<W: std::io::Write>(corpus: &Corpus, out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["id", "text", "app", "store", "language", "timestamp", "gold_label"])?;
    for review in &corpus.reviews {
        let raw = RawReview::from(review);
        writer.write_record([
            raw.id.as_str(),
            raw.text.as_str(),
            raw.app.as_deref().unwrap_or(""),
            raw.store
                .map(|s| {
                    serde_json::to_value(s)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default()
                })
                .unwrap_or_default()
                .as_str(),
            raw.language.as_deref().unwrap_or(""),
            raw.timestamp
                .map(|t| t.to_rfc3339())
                .unwrap_or_default()
                .as_str(),
            raw.gold_label.map(|l| l.as_str()).unwrap_or(""),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawAnnotation {
    review_id: String,
    votes: Vec<RequirementLabel>,
}

/// Reads annotation sets from JSONL lines of `{review_id, votes: [...]}`.
pub fn read_annotations_jsonl<R: Read>(mut source: R) -> Result<Vec<AnnotationSet>, IngestError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let content = String::from_utf8(bytes).map_err(|_| IngestError::UndecodableStream)?;
    let mut sets = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawAnnotation = serde_json::from_str(line)
            .map_err(|e| IngestError::SchemaMismatch(format!("line {}: {e}", idx + 1)))?;
        if raw.votes.is_empty() {
            return Err(IngestError::SchemaMismatch(format!(
                "line {}: annotation for {:?} has no votes",
                idx + 1,
                raw.review_id
            )));
        }
        sets.push(AnnotationSet {
            review_id: raw.review_id,
            votes: raw.votes,
        });
    }
    Ok(sets)
}
