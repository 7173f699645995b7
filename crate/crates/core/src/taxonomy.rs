//! Misclassification error taxonomy and tagging bookkeeping.
//!
//! Deciding *why* a review was misclassified is human judgment; this
//! module only mechanizes the workflow around it: drawing a seeded
//! uniform sample of misclassified reviews, importing/exporting tag
//! files, and counting tagged categories into a frequency report.

use crate::corpus::Review;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::str::FromStr;
use thiserror::Error;

/// The five recurring misclassification patterns.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCategory {
    NegativeSentimentBias,
    OverlappingCharacteristics,
    AmbiguityInLanguage,
    EmotionallyCharged,
    Others,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::NegativeSentimentBias,
        ErrorCategory::OverlappingCharacteristics,
        ErrorCategory::AmbiguityInLanguage,
        ErrorCategory::EmotionallyCharged,
        ErrorCategory::Others,
    ];

    /// Enumeration name, used verbatim in tag files.
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCategory::NegativeSentimentBias => "NEGATIVE_SENTIMENT_BIAS",
            ErrorCategory::OverlappingCharacteristics => "OVERLAPPING_CHARACTERISTICS",
            ErrorCategory::AmbiguityInLanguage => "AMBIGUITY_IN_LANGUAGE",
            ErrorCategory::EmotionallyCharged => "EMOTIONALLY_CHARGED",
            ErrorCategory::Others => "OTHERS",
        }
    }

    /// Human-readable name for report tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            ErrorCategory::NegativeSentimentBias => "Negative Sentiment Bias",
            ErrorCategory::OverlappingCharacteristics => "Overlapping Characteristics",
            ErrorCategory::AmbiguityInLanguage => "Ambiguity in Language",
            ErrorCategory::EmotionallyCharged => "Emotionally Charged Reviews",
            ErrorCategory::Others => "Others",
        }
    }

    /// What a tagger should look for before applying the category.
    pub fn description(&self) -> &'static str {
        match self {
            ErrorCategory::NegativeSentimentBias => {
                "strongly negative wording pulls the classification toward a functional \
                 complaint regardless of what the review is actually about"
            }
            ErrorCategory::OverlappingCharacteristics => {
                "the review mixes functional and non-functional concerns and one side is \
                 overemphasized, so the combined category is missed"
            }
            ErrorCategory::AmbiguityInLanguage => {
                "the wording supports both a functional and a non-functional reading and \
                 the surrounding context is too thin to disambiguate"
            }
            ErrorCategory::EmotionallyCharged => {
                "intense emotional tone or effusive praise drives the classification \
                 instead of the requirement content"
            }
            ErrorCategory::Others => {
                "patterns outside the named categories: informal language, conditional \
                 statements, heavy technical jargon"
            }
        }
    }
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCategory {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| TaxonomyError::UnknownCategory(s.to_string()))
    }
}

/// One human judgment about one misclassified review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTag {
    pub review_id: String,
    pub category: ErrorCategory,
    pub note: Option<String>,
    pub tagger: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("NO_MISCLASSIFICATIONS: the run has no misclassified reviews to sample")]
    NoMisclassifications,
    #[error("UNKNOWN_CATEGORY: {0:?} is not an error category name")]
    UnknownCategory(String),
    #[error("BAD_TAG_FILE: {0}")]
    BadTagFile(String),
}

/// A seeded sample plus the notice raised when k exceeded the
/// population and was capped.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub reviews: Vec<Review>,
    pub notice: Option<String>,
}

/// Draws a uniform sample without replacement from the misclassified
/// reviews, deterministic in the seed. The sample keeps the input's
/// relative order, so tagging sheets read naturally.
pub fn sample_misclassified(
    misclassified: &[Review],
    k: usize,
    seed: u64,
) -> Result<SampleOutcome, TaxonomyError> {
    if misclassified.is_empty() {
        return Err(TaxonomyError::NoMisclassifications);
    }
    let population = misclassified.len();
    let (take, notice) = if k > population {
        (
            population,
            Some(format!(
                "requested sample of {k} capped at the {population} misclassified review(s)"
            )),
        )
    } else {
        (k, None)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..population).collect();
    indices.shuffle(&mut rng);
    let mut chosen: Vec<usize> = indices.into_iter().take(take).collect();
    chosen.sort_unstable();
    Ok(SampleOutcome {
        reviews: chosen.iter().map(|&i| misclassified[i].clone()).collect(),
        notice,
    })
}

/// Keeps the last tag per (review, tagger) pair, preserving first-seen
/// order — the merge rule for re-imported tag files.
pub fn dedupe_tags(tags: Vec<ErrorTag>) -> Vec<ErrorTag> {
    let mut latest: HashMap<(String, String), ErrorTag> = HashMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for tag in tags {
        let key = (tag.review_id.clone(), tag.tagger.clone());
        if latest.insert(key.clone(), tag).is_none() {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|key| latest.remove(&key).expect("key recorded on insert"))
        .collect()
}

/// Tag counts per category (all five present, zero-filled) plus the
/// sampled reviews that nobody has tagged yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyReport {
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub total_tags: usize,
    pub untagged: Vec<String>,
}

/// Counts categories over the (deduplicated) tags. `sampled_ids` is
/// the tagging worksheet; ids on it without any tag are reported
/// separately, never silently folded into a category.
pub fn frequency_report(tags: &[ErrorTag], sampled_ids: &[String]) -> FrequencyReport {
    let tags = dedupe_tags(tags.to_vec());
    let mut counts: BTreeMap<ErrorCategory, usize> =
        ErrorCategory::ALL.into_iter().map(|c| (c, 0)).collect();
    let mut tagged: HashSet<&str> = HashSet::new();
    for tag in &tags {
        *counts.get_mut(&tag.category).expect("all categories seeded") += 1;
        tagged.insert(tag.review_id.as_str());
    }
    let untagged = sampled_ids
        .iter()
        .filter(|id| !tagged.contains(id.as_str()))
        .cloned()
        .collect();
    FrequencyReport {
        counts,
        total_tags: tags.len(),
        untagged,
    }
}

/// Writes tags as `review_id,category,note,tagger` CSV.
pub fn export_tags_csv(tags: &[ErrorTag], writer: impl Write) -> Result<(), TaxonomyError> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["review_id", "category", "note", "tagger"])
        .map_err(|e| TaxonomyError::BadTagFile(e.to_string()))?;
    for tag in tags {
        csv.write_record([
            tag.review_id.as_str(),
            tag.category.as_str(),
            tag.note.as_deref().unwrap_or(""),
            tag.tagger.as_str(),
        ])
        .map_err(|e| TaxonomyError::BadTagFile(e.to_string()))?;
    }
    csv.flush().map_err(|e| TaxonomyError::BadTagFile(e.to_string()))
}

/// Reads a tag CSV, applying last-write-wins per (review, tagger).
pub fn import_tags_csv(reader: impl Read) -> Result<Vec<ErrorTag>, TaxonomyError> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| TaxonomyError::BadTagFile(e.to_string()))?
        .clone();
    let expected = ["review_id", "category", "note", "tagger"];
    if headers.iter().ne(expected) {
        return Err(TaxonomyError::BadTagFile(format!(
            "header must be {:?}, found {:?}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut tags = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|e| TaxonomyError::BadTagFile(e.to_string()))?;
        if record.len() != 4 {
            return Err(TaxonomyError::BadTagFile(format!(
                "row {}: expected 4 fields, found {}",
                i + 2,
                record.len()
            )));
        }
        let note = record[2].trim();
        tags.push(ErrorTag {
            review_id: record[0].to_string(),
            category: record[1].parse()?,
            note: if note.is_empty() {
                None
            } else {
                Some(note.to_string())
            },
            tagger: record[3].to_string(),
        });
    }
    Ok(dedupe_tags(tags))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reviews(n: usize) -> Vec<Review> {
        (0..n)
            .map(|i| Review::new(format!("r{i}"), "some review text here"))
            .collect()
    }

    fn tag(review: &str, category: ErrorCategory, tagger: &str) -> ErrorTag {
        ErrorTag {
            review_id: review.to_string(),
            category,
            note: None,
            tagger: tagger.to_string(),
        }
    }

    #[test]
    fn exactly_five_categories_with_stable_names() {
        assert_eq!(ErrorCategory::ALL.len(), 5);
        for category in ErrorCategory::ALL {
            let name = category.as_str();
            assert_eq!(name.parse::<ErrorCategory>().unwrap(), category);
            assert!(!category.description().is_empty());
            assert!(!category.display_name().is_empty());
        }
        assert!(matches!(
            "NOT_A_CATEGORY".parse::<ErrorCategory>(),
            Err(TaxonomyError::UnknownCategory(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_without_replacement() {
        let population = reviews(150);
        let a = sample_misclassified(&population, 100, 42).unwrap();
        let b = sample_misclassified(&population, 100, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reviews.len(), 100);
        assert!(a.notice.is_none());

        let ids: HashSet<&String> = a.reviews.iter().map(|r| &r.id).collect();
        assert_eq!(ids.len(), 100, "sample must be distinct");
        let population_ids: HashSet<&String> = population.iter().map(|r| &r.id).collect();
        assert!(ids.is_subset(&population_ids));

        let other = sample_misclassified(&population, 100, 43).unwrap();
        assert_ne!(a.reviews, other.reviews);
    }

    #[test]
    fn oversized_k_is_capped_with_notice() {
        let population = reviews(7);
        let outcome = sample_misclassified(&population, 100, 1).unwrap();
        assert_eq!(outcome.reviews.len(), 7);
        assert!(outcome.notice.unwrap().contains("capped"));
    }

    #[test]
    fn empty_population_is_an_error() {
        assert_eq!(
            sample_misclassified(&[], 10, 1),
            Err(TaxonomyError::NoMisclassifications)
        );
    }

    #[test]
    fn frequencies_count_per_category_and_sum_to_tag_count() {
        use ErrorCategory::*;
        let tags = vec![
            tag("r1", AmbiguityInLanguage, "t1"),
            tag("r2", AmbiguityInLanguage, "t1"),
            tag("r3", AmbiguityInLanguage, "t1"),
        ];
        let report = frequency_report(&tags, &[]);
        assert_eq!(report.counts[&AmbiguityInLanguage], 3);
        assert_eq!(report.counts[&Others], 0);
        assert_eq!(report.counts.values().sum::<usize>(), report.total_tags);
        assert_eq!(report.counts.len(), 5);
    }

    #[test]
    fn no_tags_means_all_zeros() {
        let report = frequency_report(&[], &[]);
        assert_eq!(report.total_tags, 0);
        assert!(report.counts.values().all(|&c| c == 0));
    }

    #[test]
    fn untagged_sampled_reviews_are_listed_separately() {
        use ErrorCategory::*;
        let sample = vec!["r1".to_string(), "r2".to_string(), "r3".to_string()];
        let tags = vec![tag("r2", Others, "t1")];
        let report = frequency_report(&tags, &sample);
        assert_eq!(report.untagged, vec!["r1".to_string(), "r3".to_string()]);
        assert_eq!(report.total_tags, 1);
    }

    #[test]
    fn last_write_wins_per_review_and_tagger() {
        use ErrorCategory::*;
        let tags = vec![
            tag("r1", Others, "alice"),
            tag("r1", NegativeSentimentBias, "alice"), // revises her own tag
            tag("r1", AmbiguityInLanguage, "bob"),     // separate tagger, kept
        ];
        let deduped = dedupe_tags(tags);
        assert_eq!(deduped.len(), 2);
        assert_eq!(deduped[0].category, NegativeSentimentBias);
        assert_eq!(deduped[1].tagger, "bob");

        let report = frequency_report(&deduped, &[]);
        assert_eq!(report.counts[&Others], 0);
        assert_eq!(report.total_tags, 2);
    }

    #[test]
    fn csv_round_trip_preserves_tags() {
        use ErrorCategory::*;
        let tags = vec![
            ErrorTag {
                review_id: "r1".to_string(),
                category: OverlappingCharacteristics,
                note: Some("mentions crash and a feature ask".to_string()),
                tagger: "alice".to_string(),
            },
            tag("r2", EmotionallyCharged, "bob"),
        ];
        let mut buffer = Vec::new();
        export_tags_csv(&tags, &mut buffer).unwrap();
        let back = import_tags_csv(buffer.as_slice()).unwrap();
        assert_eq!(back, tags);
    }

    #[test]
    fn import_rejects_unknown_categories_and_bad_headers() {
        let bad_category = "review_id,category,note,tagger\nr1,NOT_REAL,,alice\n";
        assert!(matches!(
            import_tags_csv(bad_category.as_bytes()),
            Err(TaxonomyError::UnknownCategory(_))
        ));
        let bad_header = "id,cat,note,who\nr1,OTHERS,,alice\n";
        assert!(matches!(
            import_tags_csv(bad_header.as_bytes()),
            Err(TaxonomyError::BadTagFile(_))
        ));
    }

    #[test]
    fn import_applies_last_write_wins() {
        let content = "review_id,category,note,tagger\n\
                       r1,OTHERS,,alice\n\
                       r1,AMBIGUITY_IN_LANGUAGE,,alice\n";
        let tags = import_tags_csv(content.as_bytes()).unwrap();
        assert_eq!(tags.len(), 1);
        assert_eq!(tags[0].category, ErrorCategory::AmbiguityInLanguage);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Sample is a subset, distinct, deterministic, ≤ k.
            #[test]
            fn sampling_invariants(
                population_size in 1usize..60,
                k in 0usize..80,
                seed in any::<u64>(),
            ) {
                let population = reviews(population_size);
                let outcome = sample_misclassified(&population, k, seed).unwrap();
                prop_assert_eq!(outcome.reviews.len(), k.min(population_size));
                let ids: HashSet<&String> = outcome.reviews.iter().map(|r| &r.id).collect();
                prop_assert_eq!(ids.len(), outcome.reviews.len());
                let again = sample_misclassified(&population, k, seed).unwrap();
                prop_assert_eq!(outcome, again);
            }

            // Counts always sum to the number of (deduped) tags.
            #[test]
            fn counts_sum_to_tags(
                raw in prop::collection::vec((0usize..20, 0usize..5, 0usize..3), 0..40),
            ) {
                let tags: Vec<ErrorTag> = raw
                    .iter()
                    .map(|&(review, category, tagger)| ErrorTag {
                        review_id: format!("r{review}"),
                        category: ErrorCategory::ALL[category],
                        note: None,
                        tagger: format!("t{tagger}"),
                    })
                    .collect();
                let report = frequency_report(&tags, &[]);
                prop_assert_eq!(report.counts.values().sum::<usize>(), report.total_tags);
                prop_assert_eq!(report.total_tags, dedupe_tags(tags).len());
            }
        }
    }
}
