//! Deterministic rendering of result tables as Markdown, CSV, and JSON.
//!
//! Determinism is the contract here: a regenerated report must be
//! byte-identical when the underlying numbers are identical, so row
//! order is fixed by the callers' sorted inputs, floats print as
//! `{:.4}` in the human formats, and JSON uses serde's stable
//! shortest-round-trip float rendering. Nothing volatile (timestamps,
//! latencies, cache provenance) enters any table.

use crate::metrics::{ClassMetrics, ComparisonRow, GridReport};
use crate::readability::{GroupComparisonReport, PerClassFkgl};
use crate::taxonomy::{ErrorCategory, FrequencyReport};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Markdown,
        ReportFormat::Csv,
        ReportFormat::Json,
    ];

    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!(
                "unknown report format {other:?} (expected markdown, csv, or json)"
            )),
        }
    }
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt4_opt(v: Option<f64>) -> String {
    v.map(fmt4).unwrap_or_else(|| "n/a".to_string())
}

fn markdown_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str("| ");
    out.push_str(&header.join(" | "));
    out.push_str(" |\n|");
    for _ in header {
        out.push_str(" --- |");
    }
    out.push('\n');
    for row in rows {
        out.push_str("| ");
        out.push_str(&row.join(" | "));
        out.push_str(" |\n");
    }
    out
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn json_of(value: &impl serde::Serialize) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report types serialize");
    out.push('\n');
    out
}

/// Prompt × temperature grid (micro and macro aggregates side by side,
/// explicitly labeled).
pub fn render_grid(report: &GridReport, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json_of(report);
    }
    let header = [
        "prompt",
        "temperature",
        "micro_precision",
        "micro_recall",
        "micro_f1",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "n_evaluated",
        "n_unparsed",
        "note",
    ];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.prompt_id.clone(),
                r.temperature.to_string(),
                fmt4_opt(r.micro_precision),
                fmt4_opt(r.micro_recall),
                fmt4_opt(r.micro_f1),
                fmt4_opt(r.macro_precision),
                fmt4_opt(r.macro_recall),
                fmt4_opt(r.macro_f1),
                r.n_evaluated.to_string(),
                r.n_unparsed.to_string(),
                r.note.clone().unwrap_or_default(),
            ]
        })
        .collect();
    match format {
        ReportFormat::Markdown => {
            format!("# Prompt × temperature grid\n\n{}", markdown_table(&header, &rows))
        }
        ReportFormat::Csv => csv_table(&header, &rows),
        ReportFormat::Json => unreachable!("handled above"),
    }
}

/// Per-class precision/recall/F1 (one row per label).
pub fn render_per_class(metrics: &[ClassMetrics], format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json_of(&metrics);
    }
    let header = ["class", "tp", "fp", "fn", "precision", "recall", "f1"];
    let rows: Vec<Vec<String>> = metrics
        .iter()
        .map(|m| {
            vec![
                m.label.display_name().to_string(),
                m.tp.to_string(),
                m.fp.to_string(),
                m.fn_.to_string(),
                fmt4(m.precision),
                fmt4(m.recall),
                fmt4(m.f1),
            ]
        })
        .collect();
    match format {
        ReportFormat::Markdown => {
            format!("# Per-class performance\n\n{}", markdown_table(&header, &rows))
        }
        ReportFormat::Csv => csv_table(&header, &rows),
        ReportFormat::Json => unreachable!("handled above"),
    }
}

/// Per-class metrics of one grid cell, carrying the cell identity so
/// the table is self-describing.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CellPerClass {
    pub prompt_id: String,
    pub temperature: f64,
    pub metrics: Vec<ClassMetrics>,
}

/// Per-class metrics for the best grid cell; the cell identity rides
/// along in every format.
pub fn render_cell_per_class(cell: &CellPerClass, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json_of(cell);
    }
    let header = [
        "prompt",
        "temperature",
        "class",
        "tp",
        "fp",
        "fn",
        "precision",
        "recall",
        "f1",
    ];
    let rows: Vec<Vec<String>> = cell
        .metrics
        .iter()
        .map(|m| {
            vec![
                cell.prompt_id.clone(),
                cell.temperature.to_string(),
                m.label.display_name().to_string(),
                m.tp.to_string(),
                m.fp.to_string(),
                m.fn_.to_string(),
                fmt4(m.precision),
                fmt4(m.recall),
                fmt4(m.f1),
            ]
        })
        .collect();
    match format {
        ReportFormat::Markdown => format!(
            "# Per-class performance (best cell: {} at temperature {})\n\n{}",
            cell.prompt_id,
            cell.temperature,
            markdown_table(&header, &rows)
        ),
        ReportFormat::Csv => csv_table(&header, &rows),
        ReportFormat::Json => unreachable!("handled above"),
    }
}

/// Named-run comparison (classical baselines vs zero-shot on one split).
pub fn render_comparison(rows: &[ComparisonRow], format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json_of(&rows);
    }
    let header = [
        "run",
        "micro_precision",
        "micro_recall",
        "micro_f1",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "n_evaluated",
        "n_unparsed",
    ];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                fmt4(r.micro.precision),
                fmt4(r.micro.recall),
                fmt4(r.micro.f1),
                fmt4(r.macro_.precision),
                fmt4(r.macro_.recall),
                fmt4(r.macro_.f1),
                r.n_evaluated.to_string(),
                r.n_unparsed.to_string(),
            ]
        })
        .collect();
    match format {
        ReportFormat::Markdown => {
            format!("# Model comparison\n\n{}", markdown_table(&header, &table))
        }
        ReportFormat::Csv => csv_table(&header, &table),
        ReportFormat::Json => unreachable!("handled above"),
    }
}

/// Correct vs misclassified readability/length comparison.
pub fn render_group_comparison(report: &GroupComparisonReport, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json_of(report);
    }
    let header = ["group", "n", "mean_fkgl", "mean_char_length"];
    let mut rows = Vec::new();
    for group in [&report.correct, &report.misclassified].into_iter().flatten() {
        rows.push(vec![
            group.group_name.clone(),
            group.n.to_string(),
            fmt4(group.mean_fkgl),
            fmt4(group.mean_char_length),
        ]);
    }
    match format {
        ReportFormat::Markdown => {
            let mut out = format!(
                "# Readability by classification outcome\n\n{}",
                markdown_table(&header, &rows)
            );
            for notice in &report.notices {
                out.push_str(&format!("\n_{notice}_\n"));
            }
            out
        }
        ReportFormat::Csv => csv_table(&header, &rows),
        ReportFormat::Json => unreachable!("handled above"),
    }
}

/// Mean FKGL per gold class.
pub fn render_per_class_fkgl(report: &PerClassFkgl, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json_of(report);
    }
    let header = ["class", "n", "mean_fkgl"];
    let rows: Vec<Vec<String>> = report
        .classes
        .iter()
        .map(|(label, class)| {
            vec![
                label.display_name().to_string(),
                class.n.to_string(),
                fmt4(class.mean_fkgl),
            ]
        })
        .collect();
    match format {
        ReportFormat::Markdown => {
            let mut out = format!("# Readability by class\n\n{}", markdown_table(&header, &rows));
            for notice in &report.notices {
                out.push_str(&format!("\n_{notice}_\n"));
            }
            out
        }
        ReportFormat::Csv => csv_table(&header, &rows),
        ReportFormat::Json => unreachable!("handled above"),
    }
}

/// Error-category frequencies from the tagging worksheet.
pub fn render_error_frequency(report: &FrequencyReport, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json_of(report);
    }
    let header = ["category", "count"];
    let mut rows: Vec<Vec<String>> = ErrorCategory::ALL
        .iter()
        .map(|category| {
            vec![
                category.display_name().to_string(),
                report.counts.get(category).copied().unwrap_or(0).to_string(),
            ]
        })
        .collect();
    rows.push(vec!["total".to_string(), report.total_tags.to_string()]);
    match format {
        ReportFormat::Markdown => {
            let mut out = format!("# Error categories\n\n{}", markdown_table(&header, &rows));
            if !report.untagged.is_empty() {
                out.push_str(&format!(
                    "\n_{} sampled review(s) not yet tagged: {}_\n",
                    report.untagged.len(),
                    report.untagged.join(", ")
                ));
            }
            out
        }
        ReportFormat::Csv => csv_table(&header, &rows),
        ReportFormat::Json => unreachable!("handled above"),
    }
}

/// Writes one table in all three formats as `<stem>.md/.csv/.json`,
/// returning the paths written.
pub fn write_all_formats(
    dir: &Path,
    stem: &str,
    render: impl Fn(ReportFormat) -> String,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in ReportFormat::ALL {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        std::fs::write(&path, render(format))?;
        written.push(path);
    }
    Ok(written)
}
