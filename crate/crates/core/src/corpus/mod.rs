//! Review corpus: the review data model, file ingestion, curation
//! filters, inter-annotator agreement, and majority-vote reconciliation
//! into a gold-labeled dataset.

mod agreement;
mod ingest;

pub use agreement::{fleiss_kappa, reconcile, AgreementError, AnnotationSet};
pub use ingest::{
    export_csv, export_jsonl, ingest, read_annotations_jsonl, CorpusFormat, IngestError,
    IngestOutcome, RejectedRecord,
};

use crate::label::RequirementLabel;
use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which store a review came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreKind {
    GooglePlay,
    AppleAppStore,
    #[default]
    Unknown,
}

/// One app-store review with its metadata and optional gold label.
///
/// `word_count` and `char_count` are derived from `text` at construction
/// and are never read from files.
#[derive(Debug, Clone, PartialEq)]
pub struct Review {
    pub id: String,
    pub app_name: Option<String>,
    pub store: StoreKind,
    pub text: String,
    pub language: Option<String>,
    pub timestamp: Option<DateTime<FixedOffset>>,
    pub gold_label: Option<RequirementLabel>,
    word_count: usize,
    char_count: usize,
}

impl Review {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let word_count = text.split_whitespace().count();
        let char_count = text.chars().count();
        Review {
            id: id.into(),
            app_name: None,
            store: StoreKind::Unknown,
            text,
            language: None,
            timestamp: None,
            gold_label: None,
            word_count,
            char_count,
        }
    }

    pub fn with_gold_label(mut self, label: RequirementLabel) -> Self {
        self.gold_label = Some(label);
        self
    }

    /// Number of whitespace-delimited tokens in `text`.
    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Number of Unicode characters in `text`.
    pub fn char_count(&self) -> usize {
        self.char_count
    }
}

/// Why a review was dropped by a curation filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    TooShort,
    WrongLanguage,
}

/// Errors from corpus-level accessors.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reviews without gold labels: {}", ids.join(", "))]
    MissingGoldLabel { ids: Vec<String> },
}

/// A set of reviews plus a free-form note about where they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub reviews: Vec<Review>,
    pub provenance: String,
}

impl Corpus {
    pub fn new(reviews: Vec<Review>, provenance: impl Into<String>) -> Self {
        Corpus {
            reviews,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Review> {
        self.reviews.iter().find(|r| r.id == id)
    }

    /// Count of reviews per gold label. Errors when any review is
    /// unlabeled, listing the offending ids.
    pub fn class_counts(&self) -> Result<BTreeMap<RequirementLabel, usize>, CorpusError> {
        let missing: Vec<String> = self
            .reviews
            .iter()
            .filter(|r| r.gold_label.is_none())
            .map(|r| r.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(CorpusError::MissingGoldLabel { ids: missing });
        }
        let mut counts: BTreeMap<RequirementLabel, usize> =
            RequirementLabel::ALL.iter().map(|&l| (l, 0)).collect();
        for review in &self.reviews {
            *counts.entry(review.gold_label.unwrap()).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// Attaches gold labels from a reconciliation result. Reviews absent
    /// from the map keep whatever label they had.
    pub fn apply_gold_labels(&mut self, gold: &BTreeMap<String, RequirementLabel>) {
        for review in &mut self.reviews {
            if let Some(&label) = gold.get(&review.id) {
                review.gold_label = Some(label);
            }
        }
    }

    pub fn retain_ids(&self, ids: &[String]) -> Corpus {
        let keep: std::collections::BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        Corpus {
            reviews: self
                .reviews
                .iter()
                .filter(|r| keep.contains(r.id.as_str()))
                .cloned()
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Drops reviews shorter than `min_words` whitespace tokens. The bound
/// is inclusive: a review of exactly `min_words` words is retained.
/// Removed reviews come back with `FilterReason::TooShort`.
pub fn apply_curation_filters(
    corpus: &Corpus,
    min_words: usize,
) -> (Corpus, Vec<(Review, FilterReason)>) {
    let mut kept = Vec::new();
    let mut rejects = Vec::new();
    for review in &corpus.reviews {
        if review.word_count() >= min_words {
            kept.push(review.clone());
        } else {
            rejects.push((review.clone(), FilterReason::TooShort));
        }
    }
    let provenance = format!("{} | min_words>={}", corpus.provenance, min_words);
    (Corpus::new(kept, provenance), rejects)
}

/// Keeps reviews whose `language` field equals `lang` (case-insensitive).
/// Reviews without a language field are dropped too: the filter is
/// opt-in and only meaningful on corpora that carry the field.
pub fn filter_language(corpus: &Corpus, lang: &str) -> (Corpus, Vec<(Review, FilterReason)>) {
    let want = lang.to_ascii_lowercase();
    let mut kept = Vec::new();
    let mut rejects = Vec::new();
    for review in &corpus.reviews {
        match &review.language {
            Some(l) if l.to_ascii_lowercase() == want => kept.push(review.clone()),
            _ => rejects.push((review.clone(), FilterReason::WrongLanguage)),
        }
    }
    let provenance = format!("{} | language={}", corpus.provenance, lang);
    (Corpus::new(kept, provenance), rejects)
}

/// Sorts reviews by timestamp descending and keeps the `k` most recent.
/// Reviews without timestamps sort after all timestamped ones (stable by
/// original order). When no review carries a timestamp the corpus is
/// returned unchanged.
pub fn take_most_recent(corpus: &Corpus, k: usize) -> Corpus {
    if corpus.reviews.iter().all(|r| r.timestamp.is_none()) {
        return corpus.clone();
    }
    let mut ordered: Vec<&Review> = corpus.reviews.iter().collect();
    ordered.sort_by(|a, b| match (&a.timestamp, &b.timestamp) {
        (Some(ta), Some(tb)) => tb.cmp(ta),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let kept: Vec<Review> = ordered.into_iter().take(k).cloned().collect();
    let provenance = format!("{} | most_recent k={}", corpus.provenance, k);
    Corpus::new(kept, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review_of(id: &str, words: usize) -> Review {
        let text = vec!["word"; words].join(" ");
        Review::new(id, text)
    }

    #[test]
    fn derived_counts_match_text() {
        // 9 words: 35 letters + 8 spaces = 43 scalar values.
        let r = Review::new("r1", "App crashes on startup every time I open it");
        assert_eq!(r.word_count(), 9);
        assert_eq!(r.char_count(), 43);
    }

    #[test]
    fn char_count_is_unicode_scalar_count() {
        let r = Review::new("r1", "héllo ☆");
        assert_eq!(r.char_count(), 7);
        assert_eq!(r.word_count(), 2);
    }

    #[test]
    fn nine_word_review_rejected_at_min_ten() {
        let corpus = Corpus::new(vec![review_of("a", 9)], "test");
        let (kept, rejects) = apply_curation_filters(&corpus, 10);
        assert!(kept.is_empty());
        assert_eq!(rejects.len(), 1);
        assert_eq!(rejects[0].1, FilterReason::TooShort);
    }

    #[test]
    fn ten_word_review_retained_at_min_ten() {
        let corpus = Corpus::new(vec![review_of("a", 10)], "test");
        let (kept, rejects) = apply_curation_filters(&corpus, 10);
        assert_eq!(kept.len(), 1);
        assert!(rejects.is_empty());
    }

    #[test]
    fn min_words_zero_is_identity() {
        let corpus = Corpus::new(vec![review_of("a", 1), review_of("b", 3)], "test");
        let (kept, rejects) = apply_curation_filters(&corpus, 0);
        assert_eq!(kept.reviews, corpus.reviews);
        assert!(rejects.is_empty());
    }

    #[test]
    fn filter_is_idempotent() {
        let corpus = Corpus::new(
            vec![review_of("a", 5), review_of("b", 12), review_of("c", 10)],
            "test",
        );
        let (once, _) = apply_curation_filters(&corpus, 10);
        let (twice, rejects) = apply_curation_filters(&once, 10);
        assert_eq!(once.reviews, twice.reviews);
        assert!(rejects.is_empty());
    }

    #[test]
    fn class_counts_sum_to_corpus_size() {
        let reviews = vec![
            review_of("a", 3).with_gold_label(RequirementLabel::Neither),
            review_of("b", 3).with_gold_label(RequirementLabel::Neither),
            review_of("c", 3).with_gold_label(RequirementLabel::Neither),
        ];
        let corpus = Corpus::new(reviews, "test");
        let counts = corpus.class_counts().unwrap();
        assert_eq!(counts[&RequirementLabel::Neither], 3);
        assert_eq!(counts[&RequirementLabel::Functional], 0);
        assert_eq!(counts.values().sum::<usize>(), corpus.len());
    }

    #[test]
    fn class_counts_on_empty_corpus_is_all_zeros() {
        let corpus = Corpus::new(vec![], "test");
        let counts = corpus.class_counts().unwrap();
        assert!(counts.values().all(|&c| c == 0));
        assert_eq!(counts.len(), 4);
    }

    #[test]
    fn class_counts_reports_missing_labels() {
        let corpus = Corpus::new(vec![review_of("a", 3)], "test");
        match corpus.class_counts() {
            Err(CorpusError::MissingGoldLabel { ids }) => assert_eq!(ids, vec!["a"]),
            other => panic!("expected MissingGoldLabel, got {other:?}"),
        }
    }

    #[test]
    fn language_filter_keeps_matching_reviews_only() {
        let mut en = review_of("en", 3);
        en.language = Some("en".into());
        let mut de = review_of("de", 3);
        de.language = Some("de".into());
        let untagged = review_of("untagged", 3);
        let corpus = Corpus::new(vec![en, de, untagged], "test");
        let (kept, rejects) = filter_language(&corpus, "EN");
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.reviews[0].id, "en");
        assert_eq!(rejects.len(), 2);
    }

    #[test]
    fn most_recent_sorts_by_timestamp_desc() {
        let mut old = review_of("old", 3);
        old.timestamp = Some("2023-01-01T00:00:00+00:00".parse().unwrap());
        let mut new = review_of("new", 3);
        new.timestamp = Some("2024-06-01T00:00:00+00:00".parse().unwrap());
        let untagged = review_of("untagged", 3);
        let corpus = Corpus::new(vec![old.clone(), untagged, new.clone()], "test");

        let top2 = take_most_recent(&corpus, 2);
        let ids: Vec<&str> = top2.reviews.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["new", "old"]);
    }

    #[test]
    fn most_recent_without_timestamps_is_identity() {
        let corpus = Corpus::new(vec![review_of("a", 3), review_of("b", 3)], "test");
        let out = take_most_recent(&corpus, 1);
        assert_eq!(out.reviews, corpus.reviews);
    }
}
