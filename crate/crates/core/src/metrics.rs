//! Multi-class evaluation: confusion matrices, per-class
//! precision/recall/F1, micro and macro aggregates, and the two report
//! shapes the experiments produce (prompt×temperature grid, named-run
//! comparison).
//!
//! Aggregation is emitted two ways on purpose. Micro averaging pools
//! true/false positives across classes (for single-label data it equals
//! accuracy); macro averaging takes the unweighted mean over classes
//! that actually occur. Reports carry both, explicitly labeled, so
//! nobody has to guess which one a number is.
//!
//! Unparsed predictions (the model answered, but no label could be
//! extracted) are excluded from every denominator and surfaced as a
//! separate count per row.

use crate::label::RequirementLabel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("LENGTH_MISMATCH: {gold} gold labels vs {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("EMPTY_INPUT: no (gold, predicted) pairs to evaluate")]
    EmptyInput,
    #[error("SPLIT_MISMATCH: named runs were evaluated on different gold label sequences")]
    SplitMismatch,
}

/// 4×4 confusion matrix. Rows are gold labels, columns predictions,
/// both in `RequirementLabel::ALL` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn from_pairs(
        gold: &[RequirementLabel],
        pred: &[RequirementLabel],
    ) -> Result<Self, MetricsError> {
        if gold.len() != pred.len() {
            return Err(MetricsError::LengthMismatch {
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        if gold.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let mut counts = [[0u64; 4]; 4];
        for (g, p) in gold.iter().zip(pred) {
            counts[g.index()][p.index()] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn labels() -> [RequirementLabel; 4] {
        RequirementLabel::ALL
    }

    pub fn count(&self, gold: RequirementLabel, pred: RequirementLabel) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, gold: RequirementLabel) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    pub fn col_total(&self, pred: RequirementLabel) -> u64 {
        self.counts.iter().map(|row| row[pred.index()]).sum()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.diagonal_total() as f64 / self.total() as f64
    }
}

/// Precision/recall/F1 for one class, with the raw counts they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: RequirementLabel,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

// Counts form of the harmonic mean of precision and recall. Dividing the
// raw counts once keeps identities like "micro F1 = accuracy" exact in
// floating point instead of merely close.
fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denominator = 2 * tp + fp + fn_;
    if denominator == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denominator as f64
    }
}

/// One `ClassMetrics` per label, in `RequirementLabel::ALL` order. Zero
/// denominators yield 0.0 rather than NaN.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    RequirementLabel::ALL
        .iter()
        .map(|&label| {
            let tp = cm.count(label, label);
            let fp = cm.col_total(label) - tp;
            let fn_ = cm.row_total(label) - tp;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            ClassMetrics {
                label,
                tp,
                fp,
                fn_,
                precision,
                recall,
                f1: f1_from_counts(tp, fp, fn_),
            }
        })
        .collect()
}

/// Micro-averaged precision, recall, F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pools tp/fp/fn across classes. For single-label multiclass input the
/// three values coincide with accuracy.
pub fn micro_f1(cm: &ConfusionMatrix) -> MicroMetrics {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for metrics in per_class_metrics(cm) {
        tp += metrics.tp;
        fp += metrics.fp;
        fn_ += metrics.fn_;
    }
    MicroMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: f1_from_counts(tp, fp, fn_),
    }
}

/// Macro-averaged precision, recall, F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted mean over classes that occur in the data (tp+fp+fn > 0);
/// classes entirely absent from both gold and predictions don't drag
/// the average to zero.
pub fn macro_metrics(cm: &ConfusionMatrix) -> MacroMetrics {
    let present: Vec<ClassMetrics> = per_class_metrics(cm)
        .into_iter()
        .filter(|m| m.tp + m.fp + m.fn_ > 0)
        .collect();
    if present.is_empty() {
        return MacroMetrics {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let n = present.len() as f64;
    MacroMetrics {
        precision: present.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: present.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: present.iter().map(|m| m.f1).sum::<f64>() / n,
    }
}

pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    macro_metrics(cm).f1
}

/// One experiment cell: gold labels plus positionally aligned
/// predictions, `None` where extraction failed.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub prompt_id: String,
    pub temperature: f64,
    pub gold: Vec<RequirementLabel>,
    pub pred: Vec<Option<RequirementLabel>>,
}

/// One grid row. Metric fields are `None` when the cell had nothing to
/// evaluate (then `note` says why).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub prompt_id: String,
    pub temperature: f64,
    pub micro_precision: Option<f64>,
    pub micro_recall: Option<f64>,
    pub micro_f1: Option<f64>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    pub n_evaluated: usize,
    pub n_unparsed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
}

/// Separates evaluable (gold, pred) pairs from unparsed positions.
fn paired(
    gold: &[RequirementLabel],
    pred: &[Option<RequirementLabel>],
) -> Result<(Vec<RequirementLabel>, Vec<RequirementLabel>, usize), MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut g_out = Vec::new();
    let mut p_out = Vec::new();
    let mut unparsed = 0;
    for (g, p) in gold.iter().zip(pred) {
        match p {
            Some(p) => {
                g_out.push(*g);
                p_out.push(*p);
            }
            None => unparsed += 1,
        }
    }
    Ok((g_out, p_out, unparsed))
}

/// Builds the prompt×temperature report: one row per cell, sorted by
/// temperature then prompt id. Cells that cannot be scored (mismatched
/// lengths, nothing parsed) become annotated rows instead of failing the
/// whole report. Callers pass each cell once.
pub fn grid_report(cells: Vec<GridCell>) -> GridReport {
    let mut rows: Vec<GridRow> = cells
        .into_iter()
        .map(|cell| {
            let (prompt_id, temperature) = (cell.prompt_id, cell.temperature);
            match paired(&cell.gold, &cell.pred) {
                Err(e) => GridRow {
                    prompt_id,
                    temperature,
                    micro_precision: None,
                    micro_recall: None,
                    micro_f1: None,
                    macro_precision: None,
                    macro_recall: None,
                    macro_f1: None,
                    n_evaluated: 0,
                    n_unparsed: 0,
                    note: Some(e.to_string()),
                },
                Ok((gold, pred, n_unparsed)) => {
                    match ConfusionMatrix::from_pairs(&gold, &pred) {
                        Ok(cm) => {
                            let micro = micro_f1(&cm);
                            let mac = macro_metrics(&cm);
                            GridRow {
                                prompt_id,
                                temperature,
                                micro_precision: Some(micro.precision),
                                micro_recall: Some(micro.recall),
                                micro_f1: Some(micro.f1),
                                macro_precision: Some(mac.precision),
                                macro_recall: Some(mac.recall),
                                macro_f1: Some(mac.f1),
                                n_evaluated: gold.len(),
                                n_unparsed,
                                note: None,
                            }
                        }
                        Err(_) => GridRow {
                            prompt_id,
                            temperature,
                            micro_precision: None,
                            micro_recall: None,
                            micro_f1: None,
                            macro_precision: None,
                            macro_recall: None,
                            macro_f1: None,
                            n_evaluated: 0,
                            n_unparsed,
                            note: Some("no parsed predictions to evaluate".to_string()),
                        },
                    }
                }
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.temperature
            .total_cmp(&b.temperature)
            .then_with(|| a.prompt_id.cmp(&b.prompt_id))
    });
    GridReport { rows }
}

/// One named run for the model-comparison table.
#[derive(Debug, Clone)]
pub struct NamedRun {
    pub name: String,
    pub gold: Vec<RequirementLabel>,
    pub pred: Vec<Option<RequirementLabel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub micro: MicroMetrics,
    #[serde(rename = "macro")]
    pub macro_: MacroMetrics,
    pub n_evaluated: usize,
    pub n_unparsed: usize,
}

/// Side-by-side table over runs that share one evaluation split. Rows
/// keep the caller's order. The gold sequences must be identical across
/// runs — comparing numbers computed on different splits is the exact
/// mistake this guard exists to catch.
pub fn comparison_table(runs: &[NamedRun]) -> Result<Vec<ComparisonRow>, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let reference = &runs[0].gold;
    if runs.iter().any(|r| &r.gold != reference) {
        return Err(MetricsError::SplitMismatch);
    }
    runs.iter()
        .map(|run| {
            let (gold, pred, n_unparsed) = paired(&run.gold, &run.pred)?;
            let cm = ConfusionMatrix::from_pairs(&gold, &pred)?;
            Ok(ComparisonRow {
                name: run.name.clone(),
                micro: micro_f1(&cm),
                macro_: macro_metrics(&cm),
                n_evaluated: gold.len(),
                n_unparsed,
            })
        })
        .collect()
}
