//! Prompt catalog: the three built-in task prompts, the shared system
//! prompt, custom prompt registration, and the rendering rule that
//! composes a prompt with a review into a chat request.
//!
//! The built-in texts are load-bearing: classification quality depends
//! on their exact wording, so they are immutable and hash-pinned by
//! tests. Note the "none" wording inside the task prompts — the label
//! extractor maps it to the `neither` label via its synonym table; the
//! texts are kept as-is.

use crate::corpus::Review;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::RwLock;

/// System prompt shared by all built-in task prompts.
pub const SYSTEM_PROMPT: &str = "Imagine you are an expert requirements analyst specializing in the complex classification of app reviews into one of four categories: FRs, NFRs, both, or neither. Provide only the category\u{2014}no explanations.";

/// P1: full category definitions, role prompting, no reasoning cue.
pub const PROMPT_1: &str = "Analyze the following app review and categorize it as relating to functional requirements, non-functional requirements, both, or neither, based on the definitions below:\n\nFunctional requirements: They specify what a system should do. They describe the specific behaviors, functions, and features of the application or system. Essentially, these are the \u{201c}what\u{201d} the system should accomplish.\n\nNon-functional requirements: They describe how a system should perform a function rather than what it should do. They focus on the quality attributes, such as performance, usability, reliability, and security.\n\nBoth: If review contains both functional and non-functional requirements.\nNone: If review does not contain any type of requirement.";

/// P2: concise, no definitions, step-by-step reasoning cue.
pub const PROMPT_2: &str = "Read the app review below and decide whether it discusses functional requirements, non-functional requirements, both, or none. Let\u{2019}s think this out in step by step way to be sure we have the right answer.";

/// P3: brief definitions plus reasoning and emotional-stakes cues.
pub const PROMPT_3: &str = "Classify the following app review into one of the following categories: functional requirements (features or functionalities needed), non-functional requirements (performance, usability, etc.), both (if it mentions both types of requirements), or none (if it doesn't fit into either category). Let\u{2019}s think this out in step by step way to be sure we have the right answer. This is important to my career.";

/// Prompting techniques a prompt employs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Role,
    Cot,
    Emotion,
    Definitions,
}

/// A named prompt: system text, task text, and the techniques it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: String,
    pub system_text: String,
    pub task_text: String,
    #[serde(default)]
    pub techniques: Vec<Technique>,
}

/// A prompt composed with a review, ready to send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system_message: String,
    pub user_message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("unknown prompt id {0:?}")]
    UnknownPromptId(String),
    #[error("prompt id {0:?} is already registered")]
    DuplicatePromptId(String),
    #[error("prompt {0:?} has an empty system or task text")]
    EmptyPromptText(String),
    #[error("review {0:?} has empty text")]
    EmptyReview(String),
    #[error("cannot parse prompt file: {0}")]
    BadPromptFile(String),
}

fn builtin_prompts() -> Vec<PromptSpec> {
    use Technique::*;
    vec![
        PromptSpec {
            id: "P1".into(),
            system_text: SYSTEM_PROMPT.into(),
            task_text: PROMPT_1.into(),
            techniques: vec![Role, Definitions],
        },
        PromptSpec {
            id: "P2".into(),
            system_text: SYSTEM_PROMPT.into(),
            task_text: PROMPT_2.into(),
            techniques: vec![Role, Cot],
        },
        PromptSpec {
            id: "P3".into(),
            system_text: SYSTEM_PROMPT.into(),
            task_text: PROMPT_3.into(),
            techniques: vec![Role, Cot, Emotion, Definitions],
        },
    ]
}

/// Read-mostly prompt registry. Registration takes the write lock, so
/// concurrent readers always see either the old or the new catalog.
#[derive(Debug)]
pub struct PromptCatalog {
    entries: RwLock<BTreeMap<String, PromptSpec>>,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        Self::new()
    }
}

impl PromptCatalog {
    /// A catalog seeded with the built-in prompts P1, P2, P3.
    pub fn new() -> Self {
        let entries = builtin_prompts()
            .into_iter()
            .map(|p| (p.id.clone(), p))
            .collect();
        PromptCatalog {
            entries: RwLock::new(entries),
        }
    }

    pub fn get(&self, id: &str) -> Result<PromptSpec, PromptError> {
        self.entries
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| PromptError::UnknownPromptId(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.read().unwrap().keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a custom prompt. Built-in ids cannot be replaced.
    pub fn register_custom(&self, spec: PromptSpec) -> Result<(), PromptError> {
        if spec.system_text.trim().is_empty() || spec.task_text.trim().is_empty() {
            return Err(PromptError::EmptyPromptText(spec.id));
        }
        let mut entries = self.entries.write().unwrap();
        if entries.contains_key(&spec.id) {
            return Err(PromptError::DuplicatePromptId(spec.id));
        }
        entries.insert(spec.id.clone(), spec);
        Ok(())
    }

    /// Loads custom prompts from a TOML or JSON file holding a `prompts`
    /// array of `{id, system_text, task_text, techniques}` entries.
    pub fn register_from_str(&self, content: &str) -> Result<Vec<String>, PromptError> {
        #[derive(Deserialize)]
        struct PromptFile {
            prompts: Vec<PromptSpec>,
        }
        let parsed: PromptFile = toml::from_str(content)
            .or_else(|toml_err: toml::de::Error| {
                serde_json::from_str(content)
                    .map_err(|json_err| PromptError::BadPromptFile(format!(
                        "not valid TOML ({toml_err}) nor JSON ({json_err})"
                    )))
            })?;
        let mut ids = Vec::new();
        for spec in parsed.prompts {
            ids.push(spec.id.clone());
            self.register_custom(spec)?;
        }
        Ok(ids)
    }

    /// Digest over every catalog entry, for run-config snapshots.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let entries = self.entries.read().unwrap();
        let mut hasher = Sha256::new();
        for (id, spec) in entries.iter() {
            for part in [id.as_str(), &spec.system_text, &spec.task_text] {
                hasher.update((part.len() as u64).to_be_bytes());
                hasher.update(part.as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Composes the prompt with a review: the task text, a blank line, a
/// `Review:` marker line, then the review text unmodified. Deterministic
/// byte-for-byte.
pub fn render(spec: &PromptSpec, review: &Review) -> Result<RenderedPrompt, PromptError> {
    if review.text.trim().is_empty() {
        return Err(PromptError::EmptyReview(review.id.clone()));
    }
    Ok(RenderedPrompt {
        system_message: spec.system_text.clone(),
        user_message: format!("{}\n\nReview:\n{}", spec.task_text, review.text),
    })
}
