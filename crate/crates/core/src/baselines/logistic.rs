//! Multinomial logistic regression trained by full-batch gradient
//! descent on the L2-penalized cross-entropy (bias unpenalized).
//!
//! The objective is convex, so with a small enough learning rate the
//! recorded training trace is non-increasing — that, plus a
//! finite-difference check of the analytic gradient, is how this
//! implementation is verified. Training is single-threaded and
//! deterministic: same data, same parameters, same model.

use super::features::FeatureMatrix;
use super::BaselineError;
use crate::label::RequirementLabel;
use serde::{Deserialize, Serialize};

const K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

/// Fitted model. `weights` is class-major: `weights[c*dim + j]` is the
/// weight of feature j for class c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    dim: usize,
    weights: Vec<f64>,
    bias: [f64; K],
    training_trace: Vec<(usize, f64)>,
}

fn scores(weights: &[f64], bias: &[f64; K], dim: usize, x: &[f64]) -> [f64; K] {
    let mut s = *bias;
    for (c, s_c) in s.iter_mut().enumerate() {
        let row = &weights[c * dim..(c + 1) * dim];
        *s_c += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
    s
}

/// Numerically stable softmax plus the log-normalizer (for the loss).
fn softmax(s: &[f64; K]) -> ([f64; K], f64) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut exp = [0.0; K];
    let mut sum = 0.0;
    for (e, &v) in exp.iter_mut().zip(s) {
        *e = (v - max).exp();
        sum += *e;
    }
    for e in &mut exp {
        *e /= sum;
    }
    (exp, max + sum.ln())
}

/// Mean cross-entropy with L2 penalty, and its analytic gradient.
/// Public so external verification (the finite-difference oracle) can
/// probe exactly what training optimizes.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: &[f64; K],
    features: &FeatureMatrix,
    labels: &[RequirementLabel],
    l2: f64,
) -> Result<(f64, Vec<f64>, [f64; K]), BaselineError> {
    let n = features.n_rows();
    if n != labels.len() {
        return Err(BaselineError::LengthMismatch {
            rows: n,
            labels: labels.len(),
        });
    }
    if n == 0 {
        return Err(BaselineError::EmptyCorpus);
    }
    let dim = features.dim();
    if weights.len() != dim * K {
        return Err(BaselineError::DimMismatch {
            expected: dim * K,
            found: weights.len(),
            context: "weight vector".to_string(),
        });
    }

    let mut loss = 0.0;
    let mut grad_w = vec![0.0; dim * K];
    let mut grad_b = [0.0; K];
    for (i, label) in labels.iter().enumerate() {
        let x = features.row(i);
        let s = scores(weights, bias, dim, x);
        let (p, log_z) = softmax(&s);
        loss += log_z - s[label.index()];
        for c in 0..K {
            let delta = p[c] - if c == label.index() { 1.0 } else { 0.0 };
            grad_b[c] += delta;
            let row = &mut grad_w[c * dim..(c + 1) * dim];
            for (g, &v) in row.iter_mut().zip(x) {
                *g += delta * v;
            }
        }
    }
    let n = n as f64;
    loss /= n;
    for g in &mut grad_w {
        *g /= n;
    }
    for g in &mut grad_b {
        *g /= n;
    }
    // L2 penalty on weights only; the bias stays free.
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    Ok((loss, grad_w, grad_b))
}

/// Fits the model from zero-initialized parameters. The trace records
/// (iteration, loss) with entry 0 being the untrained loss, so a
/// 500-iteration run yields 501 points.
pub fn train_logistic(
    features: &FeatureMatrix,
    labels: &[RequirementLabel],
    params: &LogisticParams,
) -> Result<LogisticModel, BaselineError> {
    if params.learning_rate <= 0.0 || !params.learning_rate.is_finite() {
        return Err(BaselineError::InvalidParameter(format!(
            "learning_rate {} must be positive",
            params.learning_rate
        )));
    }
    if params.l2 < 0.0 {
        return Err(BaselineError::InvalidParameter(
            "l2 must be non-negative".to_string(),
        ));
    }
    let dim = features.dim();
    let mut weights = vec![0.0; dim * K];
    let mut bias = [0.0; K];
    let mut trace = Vec::with_capacity(params.iterations + 1);

    for iteration in 0..params.iterations {
        let (loss, grad_w, grad_b) =
            loss_and_gradient(&weights, &bias, features, labels, params.l2)?;
        if !loss.is_finite() {
            return Err(BaselineError::NonfiniteLoss { iteration });
        }
        trace.push((iteration, loss));
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= params.learning_rate * g;
        }
        for (b, g) in bias.iter_mut().zip(&grad_b) {
            *b -= params.learning_rate * g;
        }
    }
    let (final_loss, _, _) = loss_and_gradient(&weights, &bias, features, labels, params.l2)?;
    if !final_loss.is_finite() {
        return Err(BaselineError::NonfiniteLoss {
            iteration: params.iterations,
        });
    }
    trace.push((params.iterations, final_loss));

    Ok(LogisticModel {
        dim,
        weights,
        bias,
        training_trace: trace,
    })
}

impl LogisticModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64; K] {
        &self.bias
    }

    pub fn training_trace(&self) -> &[(usize, f64)] {
        &self.training_trace
    }

    /// Class probabilities per row; each row sums to 1 within 1e-9.
    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<[f64; K]>, BaselineError> {
        if features.dim() != self.dim && features.n_rows() > 0 {
            return Err(BaselineError::DimMismatch {
                expected: self.dim,
                found: features.dim(),
                context: "prediction features".to_string(),
            });
        }
        Ok(features
            .rows()
            .map(|x| softmax(&scores(&self.weights, &self.bias, self.dim, x)).0)
            .collect())
    }

    /// Argmax class per row; ties resolve to the enumeration-earliest
    /// label.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<RequirementLabel>, BaselineError> {
        Ok(self
            .predict_proba(features)?
            .into_iter()
            .map(|p| {
                let mut best = 0;
                for c in 1..K {
                    if p[c] > p[best] {
                        best = c;
                    }
                }
                RequirementLabel::ALL[best]
            })
            .collect())
    }
}
