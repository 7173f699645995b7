//! Inter-annotator agreement and majority-vote reconciliation.

use crate::label::RequirementLabel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Votes cast by the annotator team for one review, in annotator order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub review_id: String,
    pub votes: Vec<RequirementLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgreementError {
    #[error("annotation sets have unequal rater counts ({0} vs {1})")]
    UnequalRaterCounts(usize, usize),
    #[error("at least 2 raters per item are required (got {0})")]
    TooFewRaters(usize),
    #[error("no annotation sets given")]
    NoItems,
    #[error("chance agreement is 1 (all votes in a single category); kappa is undefined")]
    DegenerateAgreement,
}

/// Fleiss' kappa over `annotations` with labels bucketed into
/// `categories` groups by enumeration index.
///
/// With `n` raters, `N` items, and `n_ij` votes for category `j` on item
/// `i`: per-item agreement `P_i = (sum_j n_ij^2 - n) / (n (n - 1))`,
/// observed agreement `P̄ = mean_i P_i`, category shares
/// `p_j = sum_i n_ij / (N n)`, chance agreement `P̄_e = sum_j p_j^2`, and
/// `kappa = (P̄ - P̄_e) / (1 - P̄_e)`.
pub fn fleiss_kappa(
    annotations: &[AnnotationSet],
    categories: usize,
) -> Result<f64, AgreementError> {
    if annotations.is_empty() {
        return Err(AgreementError::NoItems);
    }
    let raters = annotations[0].votes.len();
    if raters < 2 {
        return Err(AgreementError::TooFewRaters(raters));
    }
    for set in annotations {
        if set.votes.len() != raters {
            return Err(AgreementError::UnequalRaterCounts(raters, set.votes.len()));
        }
    }

    let n_items = annotations.len() as f64;
    let n_raters = raters as f64;
    let mut category_totals = vec![0usize; categories];
    let mut observed_sum = 0.0;

    for set in annotations {
        let mut item_counts = vec![0usize; categories];
        for vote in &set.votes {
            let idx = vote.index().min(categories - 1);
            item_counts[idx] += 1;
            category_totals[idx] += 1;
        }
        let sq_sum: usize = item_counts.iter().map(|&c| c * c).sum();
        observed_sum += (sq_sum as f64 - n_raters) / (n_raters * (n_raters - 1.0));
    }

    let observed = observed_sum / n_items;
    let chance: f64 = category_totals
        .iter()
        .map(|&t| {
            let share = t as f64 / (n_items * n_raters);
            share * share
        })
        .sum();

    if (1.0 - chance).abs() < f64::EPSILON {
        return Err(AgreementError::DegenerateAgreement);
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Majority-vote reconciliation: a review gets gold label `L` iff at
/// least `quorum` votes equal `L`; otherwise it lands in the excluded
/// list. Every annotated review appears in exactly one of the two
/// outputs.
pub fn reconcile(
    annotations: &[AnnotationSet],
    quorum: usize,
) -> (BTreeMap<String, RequirementLabel>, Vec<String>) {
    let mut gold = BTreeMap::new();
    let mut excluded = Vec::new();
    for set in annotations {
        let mut counts: BTreeMap<RequirementLabel, usize> = BTreeMap::new();
        for vote in &set.votes {
            *counts.entry(*vote).or_insert(0) += 1;
        }
        // With quorum > n/2 at most one label can qualify; for smaller
        // quorums the most-voted qualifying label wins, ties broken by
        // enumeration order.
        let winner = RequirementLabel::ALL
            .iter()
            .filter_map(|l| counts.get(l).map(|&c| (*l, c)))
            .filter(|&(_, c)| c >= quorum)
            .max_by_key(|&(_, c)| c);
        match winner {
            Some((label, _)) => {
                gold.insert(set.review_id.clone(), label);
            }
            None => excluded.push(set.review_id.clone()),
        }
    }
    (gold, excluded)
}
