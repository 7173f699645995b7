//! Deterministic train/test splitting.
//!
//! Stratified mode allocates each class's train quota by the largest
//! remainder method, so per-class proportions survive within rounding
//! and the overall train size is exactly round(N·fraction) — 1410 of
//! 1880 at 0.75 — whenever that target is compatible with every class
//! keeping at least one review on each side. Shuffling uses a seeded
//! ChaCha stream, so a recorded seed reproduces the partition anywhere.

use super::BaselineError;
use crate::corpus::Corpus;
use crate::label::RequirementLabel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            seed: 42,
            stratified: true,
        }
    }
}

/// Splits the corpus into (train ids, test ids). Both sides preserve
/// corpus order; the partition is disjoint and covering.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Vec<String>, Vec<String>), BaselineError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(BaselineError::InvalidParameter(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    if corpus.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }

    let n = corpus.len();
    let train_target = ((n as f64) * spec.train_fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let train_set: HashSet<String> = if spec.stratified {
        let mut by_class: Vec<(RequirementLabel, Vec<String>)> = RequirementLabel::ALL
            .iter()
            .map(|&label| (label, Vec::new()))
            .collect();
        for review in &corpus.reviews {
            let gold = review
                .gold_label
                .ok_or_else(|| BaselineError::MissingGoldLabel(review.id.clone()))?;
            by_class[gold.index()].1.push(review.id.clone());
        }
        for (label, ids) in &by_class {
            if !ids.is_empty() && ids.len() < 2 {
                return Err(BaselineError::ClassTooSmall {
                    label: *label,
                    size: ids.len(),
                });
            }
        }

        // Largest-remainder allocation of the train quota per class,
        // clamped so every non-empty class keeps at least one review on
        // each side (satisfiable because single-review classes were
        // rejected above).
        let quotas: Vec<f64> = by_class
            .iter()
            .map(|(_, ids)| ids.len() as f64 * spec.train_fraction)
            .collect();
        let caps: Vec<usize> = by_class
            .iter()
            .map(|(_, ids)| ids.len().saturating_sub(1))
            .collect();
        let mut counts: Vec<usize> = quotas
            .iter()
            .zip(&caps)
            .map(|(q, &cap)| {
                if cap == 0 {
                    0
                } else {
                    (q.floor() as usize).clamp(1, cap)
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        // Step toward the overall target, largest remainders first when
        // adding and last when removing; stop once the per-class bounds
        // make the remaining distance unreachable.
        loop {
            let total: usize = counts.iter().sum();
            let mut progressed = false;
            if total < train_target {
                let mut need = train_target - total;
                for &i in &order {
                    if need == 0 {
                        break;
                    }
                    if counts[i] < caps[i] {
                        counts[i] += 1;
                        need -= 1;
                        progressed = true;
                    }
                }
            } else if total > train_target {
                let mut excess = total - train_target;
                for &i in order.iter().rev() {
                    if excess == 0 {
                        break;
                    }
                    if counts[i] > 1 {
                        counts[i] -= 1;
                        excess -= 1;
                        progressed = true;
                    }
                }
            } else {
                break;
            }
            if !progressed {
                break; // bounds saturated; target unreachable
            }
        }

        let mut chosen = HashSet::with_capacity(train_target);
        for ((_, ids), take) in by_class.iter_mut().zip(counts) {
            ids.shuffle(&mut rng);
            chosen.extend(ids.iter().take(take).cloned());
        }
        chosen
    } else {
        let mut ids: Vec<String> = corpus.reviews.iter().map(|r| r.id.clone()).collect();
        ids.shuffle(&mut rng);
        ids.into_iter().take(train_target).collect()
    };

    let mut train = Vec::with_capacity(train_set.len());
    let mut test = Vec::with_capacity(n - train_set.len());
    for review in &corpus.reviews {
        if train_set.contains(&review.id) {
            train.push(review.id.clone());
        } else {
            test.push(review.id.clone());
        }
    }
    Ok((train, test))
}
