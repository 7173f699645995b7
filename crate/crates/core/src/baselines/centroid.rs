//! Nearest-centroid classifier: per-class mean vectors, prediction by
//! smallest Euclidean distance, ties broken by label enumeration
//! order. Deliberately simple — it is the sanity-check baseline next
//! to the logistic regression.

use super::features::FeatureMatrix;
use super::BaselineError;
use crate::label::RequirementLabel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    dim: usize,
    centroids: Vec<Vec<f64>>, // one per label, enumeration order
}

/// Computes per-class means. Every label must have at least one
/// training point — a model missing a class could never predict it,
/// which is a data problem to surface, not to hide.
pub fn train_nearest_centroid(
    features: &FeatureMatrix,
    labels: &[RequirementLabel],
) -> Result<CentroidModel, BaselineError> {
    if features.n_rows() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            rows: features.n_rows(),
            labels: labels.len(),
        });
    }
    let dim = features.dim();
    let mut sums = vec![vec![0.0; dim]; 4];
    let mut counts = [0usize; 4];
    for (x, label) in features.rows().zip(labels) {
        counts[label.index()] += 1;
        for (s, v) in sums[label.index()].iter_mut().zip(x) {
            *s += v;
        }
    }
    for label in RequirementLabel::ALL {
        let count = counts[label.index()];
        if count == 0 {
            return Err(BaselineError::EmptyClass(label));
        }
        for s in &mut sums[label.index()] {
            *s /= count as f64;
        }
    }
    Ok(CentroidModel {
        dim,
        centroids: sums,
    })
}

impl CentroidModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, label: RequirementLabel) -> &[f64] {
        &self.centroids[label.index()]
    }

    /// Nearest centroid per row; on exact ties the enumeration-earliest
    /// label wins (strict-less comparison keeps the first minimum).
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<RequirementLabel>, BaselineError> {
        if features.dim() != self.dim && features.n_rows() > 0 {
            return Err(BaselineError::DimMismatch {
                expected: self.dim,
                found: features.dim(),
                context: "prediction features".to_string(),
            });
        }
        Ok(features
            .rows()
            .map(|x| {
                let mut best = 0;
                let mut best_distance = f64::INFINITY;
                for (c, centroid) in self.centroids.iter().enumerate() {
                    let distance: f64 = centroid
                        .iter()
                        .zip(x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if distance < best_distance {
                        best_distance = distance;
                        best = c;
                    }
                }
                RequirementLabel::ALL[best]
            })
            .collect())
    }
}
