//! The four-way requirement label shared by every other module.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Requirement category of a review: what the app should do
/// (functional), how it should perform (non-functional), both, or
/// neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementLabel {
    Functional,
    NonFunctional,
    Both,
    Neither,
}

impl RequirementLabel {
    /// All labels in their fixed enumeration order. This order is the
    /// tie-break and report order everywhere.
    pub const ALL: [RequirementLabel; 4] = [
        RequirementLabel::Functional,
        RequirementLabel::NonFunctional,
        RequirementLabel::Both,
        RequirementLabel::Neither,
    ];

    /// Canonical serialization string, as used in corpus files.
    pub fn as_str(&self) -> &'static str {
        match self {
            RequirementLabel::Functional => "functional",
            RequirementLabel::NonFunctional => "non_functional",
            RequirementLabel::Both => "both",
            RequirementLabel::Neither => "neither",
        }
    }

    /// Human-facing name, as a model would plausibly word it.
    pub fn display_name(&self) -> &'static str {
        match self {
            RequirementLabel::Functional => "functional",
            RequirementLabel::NonFunctional => "non-functional",
            RequirementLabel::Both => "both",
            RequirementLabel::Neither => "neither",
        }
    }

    /// Index into [`Self::ALL`].
    pub fn index(&self) -> usize {
        match self {
            RequirementLabel::Functional => 0,
            RequirementLabel::NonFunctional => 1,
            RequirementLabel::Both => 2,
            RequirementLabel::Neither => 3,
        }
    }
}

impl fmt::Display for RequirementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error for a label string outside the canonical set.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?}; expected one of functional, non_functional, both, neither")]
pub struct UnknownLabel(pub String);

impl FromStr for RequirementLabel {
    type Err = UnknownLabel;

    /// Parses the canonical strings plus a few widely used spellings
    /// ("non-functional", "fr", "nfr"). Extraction from free-form model
    /// output lives in [`crate::extract`], not here.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "functional" | "fr" => Ok(RequirementLabel::Functional),
            "non_functional" | "non-functional" | "nonfunctional" | "nfr" => {
                Ok(RequirementLabel::NonFunctional)
            }
            "both" => Ok(RequirementLabel::Both),
            "neither" => Ok(RequirementLabel::Neither),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}
