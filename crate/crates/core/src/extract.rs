//! Turn raw model output into a requirement label.
//!
//! The system prompt asks for the bare category, but chain-of-thought
//! prompts routinely come back with a paragraph of reasoning that only
//! concludes with the label. Extraction is therefore defensive: it
//! matches a synonym table case-insensitively, and when the response is
//! not a single synonym, the last category mention in the text wins —
//! conclusions trail reasoning. Responses with no mention at all are
//! reported as unparsed, never guessed.

use crate::label::RequirementLabel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How the label was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionRule {
    /// Whole response is the label's display name.
    Exact,
    /// Whole response is some other table synonym.
    Synonym,
    /// Scanned free text; the final mention won.
    LastMention,
}

/// Outcome of extracting one response. `unparsed` is true exactly when
/// no label was found; it is a data state, not a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub label: Option<RequirementLabel>,
    pub matched_phrase: String,
    pub rule: Option<ExtractionRule>,
    pub unparsed: bool,
}

impl ExtractionResult {
    fn unparsed() -> Self {
        ExtractionResult {
            label: None,
            matched_phrase: String::new(),
            rule: None,
            unparsed: true,
        }
    }

    fn found(label: RequirementLabel, phrase: &str, rule: ExtractionRule) -> Self {
        ExtractionResult {
            label: Some(label),
            matched_phrase: phrase.to_string(),
            rule: Some(rule),
            unparsed: false,
        }
    }
}

/// Counts of unparsed responses in a batch, with their positions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UnparsedSummary {
    pub count: usize,
    pub positions: Vec<usize>,
}

/// Phrase-to-label table. Phrases are stored lowercase; matching is
/// case-insensitive and word-boundary aware.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymTable {
    entries: Vec<(String, RequirementLabel)>,
}

impl Default for SynonymTable {
    fn default() -> Self {
        use RequirementLabel::*;
        let mut entries = Vec::new();
        let mut add = |phrases: &[&str], label: RequirementLabel| {
            for p in phrases {
                entries.push((p.to_string(), label));
            }
        };
        add(
            &["functional requirements", "functional requirement", "functional"],
            Functional,
        );
        add(
            &[
                "non-functional requirements",
                "non-functional requirement",
                "non-functional",
                "non functional requirements",
                "non functional requirement",
                "non functional",
                "nonfunctional requirements",
                "nonfunctional requirement",
                "nonfunctional",
                "non_functional",
            ],
            NonFunctional,
        );
        // The multiword phrases are how CoT conclusions usually spell
        // the combined category; without them, last-mention scanning
        // would read the trailing "non-functional requirements" instead.
        add(
            &[
                "both functional and non-functional requirements",
                "both functional and non-functional",
                "both functional and non functional requirements",
                "both functional and non functional",
                "both types of requirements",
                "both categories",
                "both",
            ],
            Both,
        );
        add(
            &["neither", "none", "no requirement", "no requirements"],
            Neither,
        );
        SynonymTable { entries }
    }
}

impl SynonymTable {
    /// Parses the JSON resource format: a map from canonical label
    /// string to a list of phrases.
    pub fn from_json_str(content: &str) -> Result<Self, serde_json::Error> {
        let map: BTreeMap<RequirementLabel, Vec<String>> = serde_json::from_str(content)?;
        let mut entries = Vec::new();
        for (label, phrases) in map {
            for phrase in phrases {
                entries.push((phrase.to_lowercase(), label));
            }
        }
        Ok(SynonymTable { entries })
    }

    pub fn to_json_string(&self) -> String {
        let mut map: BTreeMap<RequirementLabel, Vec<String>> = BTreeMap::new();
        for (phrase, label) in &self.entries {
            map.entry(*label).or_default().push(phrase.clone());
        }
        serde_json::to_string_pretty(&map).expect("table serializes")
    }

    /// Digest of the table contents, recorded in run snapshots.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for (phrase, label) in &self.entries {
            hasher.update(phrase.as_bytes());
            hasher.update([0u8]);
            hasher.update(label.as_str().as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(hasher.finalize())
    }
}

/// Label extractor over a synonym table.
#[derive(Debug, Clone, Default)]
pub struct Extractor {
    table: SynonymTable,
}

#[derive(Debug, Clone, Copy)]
struct Mention<'t> {
    start: usize,
    end: usize,
    label: RequirementLabel,
    phrase: &'t str,
}

/// Characters stripped from the ends of a response before the
/// whole-response synonym check ("Functional.", "**both**", `"none"`).
const WRAPPING: &[char] = &['.', '!', '"', '\'', '*', '`', ':', ' ', '\t', '\n', '\r'];

impl Extractor {
    pub fn new(table: SynonymTable) -> Self {
        Extractor { table }
    }

    pub fn table(&self) -> &SynonymTable {
        &self.table
    }

    /// Extracts a label from one raw response. Total over strings.
    pub fn extract(&self, raw_text: &str) -> ExtractionResult {
        let lower = raw_text.to_lowercase();

        // Whole-response check first: a bare category name or synonym.
        let stripped = lower.trim_matches(WRAPPING);
        if !stripped.is_empty() {
            for label in RequirementLabel::ALL {
                if stripped == label.display_name() {
                    return ExtractionResult::found(label, label.display_name(), ExtractionRule::Exact);
                }
            }
            for (phrase, label) in &self.table.entries {
                if stripped == phrase {
                    return ExtractionResult::found(*label, phrase, ExtractionRule::Synonym);
                }
            }
        }

        // Free-text scan: last mention wins; at the same end position the
        // longest phrase wins, so "non-functional requirements" beats the
        // "functional requirements" suffix embedded in it.
        let mut best: Option<Mention> = None;
        for mention in self.mentions(&lower) {
            let better = match &best {
                None => true,
                Some(b) => {
                    (mention.end, mention.end - mention.start) > (b.end, b.end - b.start)
                }
            };
            if better {
                best = Some(mention);
            }
        }
        match best {
            Some(m) => ExtractionResult::found(m.label, m.phrase, ExtractionRule::LastMention),
            None => ExtractionResult::unparsed(),
        }
    }

    /// Extracts a batch, positionally aligned, plus an unparsed summary.
    pub fn extract_batch<'a, I>(&self, raw_texts: I) -> (Vec<ExtractionResult>, UnparsedSummary)
    where
        I: IntoIterator<Item = &'a str>,
    {
        let results: Vec<ExtractionResult> =
            raw_texts.into_iter().map(|t| self.extract(t)).collect();
        let positions: Vec<usize> = results
            .iter()
            .enumerate()
            .filter(|(_, r)| r.unparsed)
            .map(|(i, _)| i)
            .collect();
        let summary = UnparsedSummary {
            count: positions.len(),
            positions,
        };
        (results, summary)
    }

    fn mentions<'t>(&'t self, lower: &str) -> Vec<Mention<'t>> {
        let mut found = Vec::new();
        for (phrase, label) in &self.table.entries {
            let mut from = 0;
            while let Some(pos) = lower[from..].find(phrase.as_str()) {
                let start = from + pos;
                let end = start + phrase.len();
                if boundary_ok(lower, start, end) && self.contextual_ok(lower, phrase, start, end) {
                    found.push(Mention {
                        start,
                        end,
                        label: *label,
                        phrase,
                    });
                }
                from = start + lower[start..].chars().next().map_or(1, char::len_utf8);
            }
        }
        found
    }

    /// The bare word "both" is common English; as a free-text mention it
    /// only counts near classification vocabulary. Multiword BOTH
    /// phrases carry their own context and are exempt.
    fn contextual_ok(&self, lower: &str, phrase: &str, start: usize, end: usize) -> bool {
        if phrase != "both" {
            return true;
        }
        const WINDOW: usize = 48;
        let from = boundary_down(lower, start.saturating_sub(WINDOW));
        let to = boundary_up(lower, (end + WINDOW).min(lower.len()));
        let window = &lower[from..to];
        ["category", "categories", "requirement", "classif", "label"]
            .iter()
            .any(|w| window.contains(w))
    }
}

fn boundary_ok(s: &str, start: usize, end: usize) -> bool {
    let before = start == 0 || !s[..start].chars().next_back().is_some_and(char::is_alphanumeric);
    let after = end == s.len() || !s[end..].chars().next().is_some_and(char::is_alphanumeric);
    before && after
}

fn boundary_down(s: &str, mut i: usize) -> usize {
    while !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

fn boundary_up(s: &str, mut i: usize) -> usize {
    while i < s.len() && !s.is_char_boundary(i) {
        i += 1;
    }
    i
}
