//! Flesch–Kincaid Grade Level and length statistics.
//!
//! grade = 0.39·(words/sentences) + 11.8·(syllables/words) − 15.59
//!
//! The tokenization behind the counts is pinned here and frozen by
//! golden tests: sentences are split on runs of terminal punctuation,
//! words are whitespace tokens with edge punctuation stripped, and
//! syllables come from a vowel-run heuristic. Other FKGL
//! implementations make different choices, so absolute values can
//! differ slightly from theirs; within this crate the numbers are
//! deterministic. Grades are reported unclamped — a trivial text really
//! does score below zero, and hiding that would hide information.

use crate::corpus::Review;
use crate::label::RequirementLabel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReadabilityError {
    #[error("NO_WORDS: text contains no countable words{}", id_suffix(.review_id))]
    NoWords { review_id: Option<String> },
    #[error("LENGTH_MISMATCH: {reviews} reviews vs {predictions} predictions")]
    LengthMismatch { reviews: usize, predictions: usize },
    #[error("MISSING_GOLD_LABEL: review {0} has no gold label")]
    MissingGoldLabel(String),
}

fn id_suffix(id: &Option<String>) -> String {
    match id {
        Some(id) => format!(" (review {id})"),
        None => String::new(),
    }
}

/// Readability counts for one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStats {
    pub n_words: usize,
    pub n_sentences: usize,
    pub n_syllables: usize,
    pub fkgl: f64,
    pub char_length: usize,
}

/// The grade formula on raw counts. Exposed separately so tests can
/// probe monotonicity without constructing texts.
pub fn fkgl_from_counts(n_words: usize, n_sentences: usize, n_syllables: usize) -> f64 {
    let words = n_words as f64;
    let sentences = n_sentences as f64;
    let syllables = n_syllables as f64;
    0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59
}

/// Counts maximal vowel runs (a e i o u y), drops one for a silent
/// trailing 'e' unless the word ends in consonant+"le", and never
/// returns less than 1 for a non-empty word.
pub fn syllables_in_word(word: &str) -> usize {
    let lower = word.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    if chars.is_empty() {
        return 0;
    }
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut runs = 0;
    let mut in_run = false;
    for &c in &chars {
        if is_vowel(c) {
            if !in_run {
                runs += 1;
            }
            in_run = true;
        } else {
            in_run = false;
        }
    }
    let n = chars.len();
    let ends_in_e = chars[n - 1] == 'e';
    let consonant_le =
        n >= 3 && chars[n - 2] == 'l' && chars[n - 3].is_alphabetic() && !is_vowel(chars[n - 3]);
    if ends_in_e && !consonant_le {
        runs -= 1_usize.min(runs);
    }
    runs.max(1)
}

fn words_of(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|token| token.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

fn sentence_count(text: &str) -> usize {
    let n = text
        .split(['.', '!', '?'])
        .filter(|segment| segment.chars().any(char::is_alphanumeric))
        .count();
    n.max(1)
}

/// Computes the full readability profile of one text.
pub fn text_stats(text: &str) -> Result<TextStats, ReadabilityError> {
    let words = words_of(text);
    if words.is_empty() {
        return Err(ReadabilityError::NoWords { review_id: None });
    }
    let n_words = words.len();
    let n_sentences = sentence_count(text);
    let n_syllables = words.iter().map(|w| syllables_in_word(w)).sum();
    Ok(TextStats {
        n_words,
        n_sentences,
        n_syllables,
        fkgl: fkgl_from_counts(n_words, n_sentences, n_syllables),
        char_length: text.chars().count(),
    })
}

/// Mean readability and length of one group of reviews.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_name: String,
    pub mean_fkgl: f64,
    pub mean_char_length: f64,
    pub n: usize,
}

/// Correct-vs-misclassified comparison. An empty side is `None` and
/// explained in `notices` rather than reported with fake zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparisonReport {
    pub correct: Option<GroupComparison>,
    pub misclassified: Option<GroupComparison>,
    pub notices: Vec<String>,
}

fn summarize(name: &str, members: &[&Review]) -> Result<Option<GroupComparison>, ReadabilityError> {
    if members.is_empty() {
        return Ok(None);
    }
    let mut fkgl_sum = 0.0;
    let mut char_sum = 0.0;
    for review in members {
        let stats = text_stats(&review.text).map_err(|_| ReadabilityError::NoWords {
            review_id: Some(review.id.clone()),
        })?;
        fkgl_sum += stats.fkgl;
        char_sum += review.char_count() as f64;
    }
    let n = members.len();
    Ok(Some(GroupComparison {
        group_name: name.to_string(),
        mean_fkgl: fkgl_sum / n as f64,
        mean_char_length: char_sum / n as f64,
        n,
    }))
}

/// Partitions reviews by whether the aligned prediction matches the
/// gold label, then compares the two groups.
pub fn group_comparison(
    reviews: &[Review],
    predictions: &[RequirementLabel],
) -> Result<GroupComparisonReport, ReadabilityError> {
    if reviews.len() != predictions.len() {
        return Err(ReadabilityError::LengthMismatch {
            reviews: reviews.len(),
            predictions: predictions.len(),
        });
    }
    let mut correct = Vec::new();
    let mut misclassified = Vec::new();
    for (review, pred) in reviews.iter().zip(predictions) {
        let gold = review
            .gold_label
            .ok_or_else(|| ReadabilityError::MissingGoldLabel(review.id.clone()))?;
        if gold == *pred {
            correct.push(review);
        } else {
            misclassified.push(review);
        }
    }
    let mut notices = Vec::new();
    if correct.is_empty() {
        notices.push("no correctly classified reviews; group omitted".to_string());
    }
    if misclassified.is_empty() {
        notices.push("no misclassified reviews; group omitted".to_string());
    }
    Ok(GroupComparisonReport {
        correct: summarize("correct", &correct)?,
        misclassified: summarize("misclassified", &misclassified)?,
        notices,
    })
}

/// Mean FKGL of one gold class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFkgl {
    pub mean_fkgl: f64,
    pub n: usize,
}

/// Per-class readability report: classes with no reviews are omitted
/// and listed in `notices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassFkgl {
    pub classes: BTreeMap<RequirementLabel, ClassFkgl>,
    pub notices: Vec<String>,
}

/// Groups reviews by gold label and averages FKGL within each class.
pub fn per_class_fkgl(reviews: &[Review]) -> Result<PerClassFkgl, ReadabilityError> {
    let mut groups: BTreeMap<RequirementLabel, Vec<&Review>> = BTreeMap::new();
    for review in reviews {
        let gold = review
            .gold_label
            .ok_or_else(|| ReadabilityError::MissingGoldLabel(review.id.clone()))?;
        groups.entry(gold).or_default().push(review);
    }
    let mut classes = BTreeMap::new();
    let mut notices = Vec::new();
    for label in RequirementLabel::ALL {
        match groups.get(&label) {
            Some(members) if !members.is_empty() => {
                let mut sum = 0.0;
                for review in members {
                    sum += text_stats(&review.text)
                        .map_err(|_| ReadabilityError::NoWords {
                            review_id: Some(review.id.clone()),
                        })?
                        .fkgl;
                }
                classes.insert(
                    label,
                    ClassFkgl {
                        mean_fkgl: sum / members.len() as f64,
                        n: members.len(),
                    },
                );
            }
            _ => notices.push(format!("class {} has no reviews; omitted", label.as_str())),
        }
    }
    Ok(PerClassFkgl { classes, notices })
}
