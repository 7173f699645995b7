//! Synthetic labeled data for validating the classifiers.
//!
//! Four well-separated clusters in the plane, one per label, with
//! bounded uniform noise. With `noise` below 2.0 the clusters cannot
//! overlap, so a correct convex trainer must fit them essentially
//! perfectly — which is exactly what the verification tests assert.

use super::features::FeatureMatrix;
use crate::label::RequirementLabel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cluster centers per label, in enumeration order.
pub const CENTERS: [[f64; 2]; 4] = [[2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0], [2.0, -2.0]];

/// Generates `n_per_class` points around each center, perturbed by
/// uniform noise in [−noise, noise] per coordinate. Deterministic in
/// the seed.
pub fn labeled_blobs(
    n_per_class: usize,
    noise: f64,
    seed: u64,
) -> (FeatureMatrix, Vec<RequirementLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(n_per_class * 4);
    let mut rows = Vec::with_capacity(n_per_class * 4);
    let mut labels = Vec::with_capacity(n_per_class * 4);
    for (label, center) in RequirementLabel::ALL.into_iter().zip(CENTERS) {
        for i in 0..n_per_class {
            ids.push(format!("{}-{i}", label.as_str()));
            rows.push(vec![
                center[0] + rng.random_range(-noise..=noise),
                center[1] + rng.random_range(-noise..=noise),
            ]);
            labels.push(label);
        }
    }
    let matrix = FeatureMatrix::from_rows(ids, rows).expect("blob rows are uniform and finite");
    (matrix, labels)
}
