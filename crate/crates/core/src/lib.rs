//! Core library for classifying app-store reviews into requirement
//! categories (functional, non-functional, both, neither) with zero-shot
//! chat-completion prompting, plus everything needed to evaluate the
//! results: annotation reconciliation, prompt/temperature grids,
//! multi-class metrics, readability statistics, traditional-ML baselines,
//! and an error taxonomy for misclassification review.
//!
//! The crate is organized around the workflow:
//!
//! 1. [`corpus`] — load and curate reviews, reconcile annotator votes.
//! 2. [`prompts`] — the built-in prompt catalog and request rendering.
//! 3. [`gateway`] — chat-completion client with caching, retries, and
//!    bounded concurrency.
//! 4. [`extract`] — turn raw model output (including chain-of-thought
//!    text) into a label.
//! 5. [`metrics`] / [`readability`] — confusion matrices, per-class and
//!    micro/macro scores, FKGL readability analysis.
//! 6. [`baselines`] — TF-IDF / embedding features, logistic regression,
//!    nearest centroid, stratified splits.
//! 7. [`taxonomy`] — error-category tagging of misclassified reviews.
//! 8. [`runner`] — grid and baseline orchestration over run directories.

pub mod baselines;
pub mod config;
pub mod corpus;
pub mod extract;
pub mod gateway;
pub mod label;
pub mod metrics;
pub mod prompts;
pub mod readability;
pub mod report;
pub mod runner;
pub mod taxonomy;

pub use corpus::{Corpus, Review};
pub use label::RequirementLabel;
