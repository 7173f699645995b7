//! Experiment orchestration over self-contained run directories.
//!
//! A grid run writes everything needed to re-derive its reports without
//! network access: a config snapshot (with the fingerprints of every
//! result-shaping component), the curated corpus, raw per-item results,
//! and the rendered tables. Report regeneration is a pure function of
//! those artifacts, so a rerun over a warm cache — or a regeneration
//! after deleting `reports/` — reproduces the files byte for byte.

use crate::baselines::{
    fetch_embeddings, load_embeddings, split, tfidf_features, train_logistic,
    train_nearest_centroid, BaselineError, EmbeddingTransport, EmbeddingsSpec, FeatureMatrix,
    HttpEmbeddingTransport,
};
use crate::config::{ConfigError, FeatureConfig, RunConfig};
use crate::corpus::{
    export_jsonl, ingest, Corpus, CorpusError, CorpusFormat, IngestError, Review,
};
use crate::extract::{ExtractionRule, Extractor, SynonymTable};
use crate::gateway::{ChatBackend, ChatRequest, Gateway, GatewayError, HttpBackend, MockBackend, MockDefault};
use crate::label::RequirementLabel;
use crate::metrics::{
    comparison_table, grid_report, per_class_metrics, ComparisonRow, ConfusionMatrix, GridCell,
    GridReport, MetricsError, NamedRun,
};
use crate::prompts::{render, PromptCatalog, PromptError, PromptSpec};
use crate::readability::{group_comparison, per_class_fkgl, GroupComparisonReport, PerClassFkgl};
use crate::report::{
    render_cell_per_class, render_comparison, render_error_frequency, render_grid,
    render_group_comparison, render_per_class_fkgl, write_all_formats, CellPerClass,
};
use crate::taxonomy::{
    frequency_report, import_tags_csv, sample_misclassified, FrequencyReport, TaxonomyError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Bumped when extraction rules change in a way that affects labels.
pub const EXTRACTOR_VERSION: &str = "1";
/// Bumped when the readability/TF-IDF tokenizers change.
pub const TOKENIZER_VERSION: &str = "1";

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const REPORTS_DIR: &str = "reports";
pub const ERROR_SAMPLE_FILE: &str = "error_sample.csv";
pub const ERROR_TAGS_FILE: &str = "error_tags.csv";

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("UNKNOWN_RUN_DIRECTORY: {0} has no {SNAPSHOT_FILE}")]
    UnknownRunDirectory(String),
    #[error("run directory artifact is unusable: {0}")]
    BadRunArtifact(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunnerError {
    RunnerError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Effective configuration of a run plus the fingerprints of every
/// component that shapes results. Written once, before any completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    /// "grid" or "baseline".
    pub kind: String,
    pub config: RunConfig,
    pub prompt_fingerprint: String,
    pub synonym_fingerprint: String,
    pub extractor_version: String,
    pub tokenizer_version: String,
    pub crate_version: String,
    pub corpus_provenance: String,
    pub corpus_size: usize,
}

/// One completed (prompt, temperature, review) work item, as persisted
/// to `results.jsonl`. Volatile observations (latency, cache hits,
/// timestamps) are deliberately absent so reruns over a warm cache
/// reproduce the file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub prompt_id: String,
    pub temperature: f64,
    pub review_id: String,
    /// Raw model output; `None` when the gateway gave up on the item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RequirementLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_phrase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<ExtractionRule>,
    pub unparsed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_items: usize,
    pub n_completed: usize,
    /// Items the gateway could not complete (after retries).
    pub n_failed: usize,
    /// Completed items whose response yielded no label.
    pub n_unparsed: usize,
}

impl RunSummary {
    /// True when some items produced no usable label; maps to exit
    /// code 2.
    pub fn is_partial(&self) -> bool {
        self.n_failed > 0 || self.n_unparsed > 0
    }
}

/// Every table a grid run dir can yield. Optional tables are `None`
/// when their inputs are absent, with the reason in `notices`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub grid: GridReport,
    pub best_cell: Option<CellPerClass>,
    pub group: Option<GroupComparisonReport>,
    pub fkgl: Option<PerClassFkgl>,
    pub errors: Option<FrequencyReport>,
    pub notices: Vec<String>,
}

#[derive(Debug)]
pub struct GridRunOutput {
    pub run_dir: PathBuf,
    pub summary: RunSummary,
    pub bundle: ReportBundle,
    pub report_files: Vec<PathBuf>,
}

/// Allocates `out_root/run-NNN` with the smallest unused NNN. No
/// timestamps: the name must be stable under reruns in tests.
pub fn allocate_run_dir(out_root: &Path) -> Result<PathBuf, RunnerError> {
    std::fs::create_dir_all(out_root).map_err(|e| io_err(out_root, e))?;
    for n in 1..10_000u32 {
        let candidate = out_root.join(format!("run-{n:03}"));
        if !candidate.exists() {
            return Ok(candidate);
        }
    }
    Err(RunnerError::BadRunArtifact(format!(
        "no free run-NNN name under {}",
        out_root.display()
    )))
}

/// Builds the chat backend the config asks for: a scripted mock, or the
/// HTTP backend keyed from the configured environment variable.
pub fn build_backend(config: &RunConfig) -> Result<Arc<dyn ChatBackend>, RunnerError> {
    if config.mock.enabled {
        let mock = MockBackend::new(MockDefault::HashLabel);
        if let Some(path) = &config.mock.responses_path {
            let content = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            mock.load_rules_jsonl(&content)
                .map_err(|e| RunnerError::BadRunArtifact(format!("bad mock rules file: {e}")))?;
        }
        Ok(Arc::new(mock))
    } else {
        Ok(Arc::new(HttpBackend::from_env(
            config.endpoint.clone(),
            &config.api_key_env,
        )?))
    }
}

/// Loads a corpus file, inferring CSV vs JSONL from the extension.
pub fn load_corpus_file(path: &Path) -> Result<Corpus, RunnerError> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => CorpusFormat::Csv,
        _ => CorpusFormat::Jsonl,
    };
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let outcome = ingest(file, format, &path.display().to_string())?;
    Ok(outcome.corpus)
}

fn prompt_specs(config: &RunConfig) -> Result<(PromptCatalog, Vec<PromptSpec>), RunnerError> {
    let catalog = PromptCatalog::new();
    if let Some(file) = &config.prompt_file {
        let content = std::fs::read_to_string(file).map_err(|e| io_err(file, e))?;
        catalog.register_from_str(&content)?;
    }
    let specs = config
        .prompts
        .iter()
        .map(|id| catalog.get(id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((catalog, specs))
}

fn write_snapshot(
    run_dir: &Path,
    kind: &str,
    config: &RunConfig,
    catalog: &PromptCatalog,
    corpus: &Corpus,
) -> Result<RunSnapshot, RunnerError> {
    let snapshot = RunSnapshot {
        kind: kind.to_string(),
        config: config.clone(),
        prompt_fingerprint: catalog.fingerprint(),
        synonym_fingerprint: SynonymTable::default().fingerprint(),
        extractor_version: EXTRACTOR_VERSION.to_string(),
        tokenizer_version: TOKENIZER_VERSION.to_string(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        corpus_provenance: corpus.provenance.clone(),
        corpus_size: corpus.len(),
    };
    let path = run_dir.join(SNAPSHOT_FILE);
    let mut json = serde_json::to_string_pretty(&snapshot)
        .map_err(|e| RunnerError::BadRunArtifact(e.to_string()))?;
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(snapshot)
}

fn write_corpus_copy(run_dir: &Path, corpus: &Corpus) -> Result<(), RunnerError> {
    let path = run_dir.join(CORPUS_FILE);
    let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    export_jsonl(corpus, file).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn write_results(run_dir: &Path, records: &[ItemRecord]) -> Result<(), RunnerError> {
    let path = run_dir.join(RESULTS_FILE);
    let mut file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| RunnerError::BadRunArtifact(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

pub fn read_results(run_dir: &Path) -> Result<Vec<ItemRecord>, RunnerError> {
    let path = run_dir.join(RESULTS_FILE);
    let file = std::fs::File::open(&path).map_err(|e| io_err(&path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ItemRecord = serde_json::from_str(&line).map_err(|e| {
            RunnerError::BadRunArtifact(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Runs the full prompt × temperature grid over the corpus. Cells run
/// sequentially; within a cell the gateway fans out up to its
/// `max_in_flight` limit. Item failures are recorded, not fatal.
pub async fn run_grid(
    corpus: &Corpus,
    config: &RunConfig,
    backend: Arc<dyn ChatBackend>,
    run_dir: &Path,
    cache_path: Option<PathBuf>,
) -> Result<GridRunOutput, RunnerError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(RunnerError::BadRunArtifact("corpus is empty".to_string()));
    }
    std::fs::create_dir_all(run_dir).map_err(|e| io_err(run_dir, e))?;

    let (catalog, specs) = prompt_specs(config)?;
    write_snapshot(run_dir, "grid", config, &catalog, corpus)?;
    write_corpus_copy(run_dir, corpus)?;

    let gateway = Gateway::new(backend, config.gateway_config(cache_path))?;
    let extractor = Extractor::new(SynonymTable::default());

    let mut records = Vec::with_capacity(specs.len() * config.temperatures.len() * corpus.len());
    let mut summary = RunSummary::default();
    for spec in &specs {
        for &temperature in &config.temperatures {
            let mut requests = Vec::with_capacity(corpus.len());
            for review in &corpus.reviews {
                let rendered = render(spec, review)?;
                requests.push(ChatRequest {
                    model: config.model.clone(),
                    temperature,
                    system_message: rendered.system_message,
                    user_message: rendered.user_message,
                    max_tokens: config.max_tokens,
                });
            }
            let responses = gateway.complete_batch(&requests).await;
            for (review, response) in corpus.reviews.iter().zip(responses) {
                summary.n_items += 1;
                let record = match response {
                    Ok(response) => {
                        summary.n_completed += 1;
                        let extraction = extractor.extract(&response.raw_text);
                        if extraction.unparsed {
                            summary.n_unparsed += 1;
                        }
                        ItemRecord {
                            prompt_id: spec.id.clone(),
                            temperature,
                            review_id: review.id.clone(),
                            raw_text: Some(response.raw_text),
                            error: None,
                            label: extraction.label,
                            matched_phrase: (!extraction.matched_phrase.is_empty())
                                .then_some(extraction.matched_phrase),
                            rule: extraction.rule,
                            unparsed: extraction.unparsed,
                        }
                    }
                    Err(error) => {
                        summary.n_failed += 1;
                        ItemRecord {
                            prompt_id: spec.id.clone(),
                            temperature,
                            review_id: review.id.clone(),
                            raw_text: None,
                            error: Some(error.to_string()),
                            label: None,
                            matched_phrase: None,
                            rule: None,
                            unparsed: false,
                        }
                    }
                };
                records.push(record);
            }
        }
    }

    write_results(run_dir, &records)?;
    let bundle = build_reports(corpus, &records, load_error_artifacts(run_dir)?)?;
    let report_files = write_report_bundle(run_dir, &bundle)?;
    Ok(GridRunOutput {
        run_dir: run_dir.to_path_buf(),
        summary,
        bundle,
        report_files,
    })
}

/// Error-analysis artifacts found in a run dir: the sampled worksheet
/// ids and any tags authored against them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorArtifacts {
    pub sampled_ids: Vec<String>,
    pub tags: Option<Vec<crate::taxonomy::ErrorTag>>,
}

pub fn load_error_artifacts(run_dir: &Path) -> Result<ErrorArtifacts, RunnerError> {
    let mut artifacts = ErrorArtifacts::default();
    let sample_path = run_dir.join(ERROR_SAMPLE_FILE);
    if sample_path.exists() {
        let file = std::fs::File::open(&sample_path).map_err(|e| io_err(&sample_path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        for row in reader.records() {
            let row = row.map_err(|e| {
                RunnerError::BadRunArtifact(format!("{}: {e}", sample_path.display()))
            })?;
            if let Some(id) = row.get(0) {
                artifacts.sampled_ids.push(id.to_string());
            }
        }
    }
    let tags_path = run_dir.join(ERROR_TAGS_FILE);
    if tags_path.exists() {
        let file = std::fs::File::open(&tags_path).map_err(|e| io_err(&tags_path, e))?;
        artifacts.tags = Some(import_tags_csv(file)?);
    }
    Ok(artifacts)
}

/// Derives every report table from the persisted corpus and results.
/// Pure up to its inputs, which is what makes regeneration
/// byte-identical.
pub fn build_reports(
    corpus: &Corpus,
    records: &[ItemRecord],
    error_artifacts: ErrorArtifacts,
) -> Result<ReportBundle, RunnerError> {
    let gold_of: BTreeMap<&str, RequirementLabel> = corpus
        .reviews
        .iter()
        .filter_map(|r| r.gold_label.map(|g| (r.id.as_str(), g)))
        .collect();

    // Group records into grid cells; grid_report sorts rows itself.
    // Only gold-labeled reviews are evaluated: pred None covers both
    // unparsed and failed items.
    let mut cells: BTreeMap<(String, u64), GridCell> = BTreeMap::new();
    let mut n_goldless = 0usize;
    for record in records {
        let Some(&gold) = gold_of.get(record.review_id.as_str()) else {
            n_goldless += 1;
            continue;
        };
        let key = (record.prompt_id.clone(), record.temperature.to_bits());
        let cell = cells.entry(key).or_insert_with(|| GridCell {
            prompt_id: record.prompt_id.clone(),
            temperature: record.temperature,
            gold: Vec::new(),
            pred: Vec::new(),
        });
        cell.gold.push(gold);
        cell.pred.push(record.label);
    }
    let mut notices = Vec::new();
    if n_goldless > 0 {
        notices.push(format!(
            "{n_goldless} result item(s) had no gold label and were excluded from evaluation"
        ));
    }

    let grid = grid_report(cells.into_values().collect());

    // Best cell (highest micro F1; ties go to the first row in sorted
    // order) anchors the per-class and readability breakdowns, which
    // analyse one configuration at a time.
    let best_row = grid
        .rows
        .iter()
        .filter(|r| r.micro_f1.is_some())
        .max_by(|a, b| a.micro_f1.unwrap().total_cmp(&b.micro_f1.unwrap()));
    let mut best_cell = None;
    let mut group = None;
    if let Some(row) = best_row {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        let mut reviews_for_group: Vec<Review> = Vec::new();
        let mut preds_for_group: Vec<RequirementLabel> = Vec::new();
        for record in records {
            if record.prompt_id != row.prompt_id
                || record.temperature.to_bits() != row.temperature.to_bits()
            {
                continue;
            }
            let Some(&g) = gold_of.get(record.review_id.as_str()) else {
                continue;
            };
            let Some(label) = record.label else { continue };
            gold.push(g);
            pred.push(label);
            if let Some(review) = corpus.get(&record.review_id) {
                reviews_for_group.push(review.clone());
                preds_for_group.push(label);
            }
        }
        if !gold.is_empty() {
            let cm = ConfusionMatrix::from_pairs(&gold, &pred)?;
            best_cell = Some(CellPerClass {
                prompt_id: row.prompt_id.clone(),
                temperature: row.temperature,
                metrics: per_class_metrics(&cm),
            });
        }
        match group_comparison(&reviews_for_group, &preds_for_group) {
            Ok(report) => group = Some(report),
            Err(e) => notices.push(format!("readability-group table omitted: {e}")),
        }
    } else {
        notices.push(
            "no grid cell produced evaluable results; per-class and readability-group tables omitted"
                .to_string(),
        );
    }

    let labeled: Vec<Review> = corpus
        .reviews
        .iter()
        .filter(|r| r.gold_label.is_some())
        .cloned()
        .collect();
    let fkgl = if labeled.is_empty() {
        notices.push("no gold-labeled reviews; per-class readability table omitted".to_string());
        None
    } else {
        match per_class_fkgl(&labeled) {
            Ok(report) => Some(report),
            Err(e) => {
                notices.push(format!("per-class readability table omitted: {e}"));
                None
            }
        }
    };

    let errors = match &error_artifacts.tags {
        Some(tags) => Some(frequency_report(tags, &error_artifacts.sampled_ids)),
        None => {
            notices.push(format!(
                "no {ERROR_TAGS_FILE} in the run directory; error-frequency table omitted"
            ));
            None
        }
    };

    Ok(ReportBundle {
        grid,
        best_cell,
        group,
        fkgl,
        errors,
        notices,
    })
}

fn write_report_bundle(run_dir: &Path, bundle: &ReportBundle) -> Result<Vec<PathBuf>, RunnerError> {
    let dir = run_dir.join(REPORTS_DIR);
    let mut files = Vec::new();
    let io = |e: std::io::Error| io_err(&dir, e);
    files.extend(write_all_formats(&dir, "grid", |f| render_grid(&bundle.grid, f)).map_err(io)?);
    if let Some(cell) = &bundle.best_cell {
        files.extend(
            write_all_formats(&dir, "per_class", |f| render_cell_per_class(cell, f)).map_err(io)?,
        );
    }
    if let Some(group) = &bundle.group {
        files.extend(
            write_all_formats(&dir, "readability_group", |f| render_group_comparison(group, f))
                .map_err(io)?,
        );
    }
    if let Some(fkgl) = &bundle.fkgl {
        files.extend(
            write_all_formats(&dir, "per_class_fkgl", |f| render_per_class_fkgl(fkgl, f))
                .map_err(io)?,
        );
    }
    if let Some(errors) = &bundle.errors {
        files.extend(
            write_all_formats(&dir, "error_frequency", |f| render_error_frequency(errors, f))
                .map_err(io)?,
        );
    }
    Ok(files)
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub files: Vec<PathBuf>,
    pub bundle: ReportBundle,
}

pub fn read_snapshot(run_dir: &Path) -> Result<RunSnapshot, RunnerError> {
    let path = run_dir.join(SNAPSHOT_FILE);
    if !path.exists() {
        return Err(RunnerError::UnknownRunDirectory(
            run_dir.display().to_string(),
        ));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| RunnerError::BadRunArtifact(format!("{}: {e}", path.display())))
}

pub fn read_run_corpus(run_dir: &Path) -> Result<Corpus, RunnerError> {
    let path = run_dir.join(CORPUS_FILE);
    let file = std::fs::File::open(&path).map_err(|e| io_err(&path, e))?;
    let outcome = ingest(file, CorpusFormat::Jsonl, &path.display().to_string())?;
    if !outcome.rejects.is_empty() {
        return Err(RunnerError::BadRunArtifact(format!(
            "{}: {} corrupt review record(s)",
            path.display(),
            outcome.rejects.len()
        )));
    }
    Ok(outcome.corpus)
}

/// Regenerates every report table from the run directory's persisted
/// artifacts. Requires no network; output is byte-identical across
/// invocations.
pub fn regenerate_reports(run_dir: &Path) -> Result<ReportOutcome, RunnerError> {
    let snapshot = read_snapshot(run_dir)?;
    if snapshot.kind == "baseline" {
        return Err(RunnerError::BadRunArtifact(
            "baseline run directories hold a comparison table; use the baseline command to rebuild it"
                .to_string(),
        ));
    }
    let corpus = read_run_corpus(run_dir)?;
    let records = read_results(run_dir)?;
    let bundle = build_reports(&corpus, &records, load_error_artifacts(run_dir)?)?;
    let files = write_report_bundle(run_dir, &bundle)?;
    Ok(ReportOutcome { files, bundle })
}

/// Summary derived from persisted records (used when re-opening a run).
pub fn summarize_records(records: &[ItemRecord]) -> RunSummary {
    let mut summary = RunSummary {
        n_items: records.len(),
        ..RunSummary::default()
    };
    for record in records {
        if record.raw_text.is_some() {
            summary.n_completed += 1;
            if record.unparsed {
                summary.n_unparsed += 1;
            }
        } else {
            summary.n_failed += 1;
        }
    }
    summary
}

/// Best cell's parsed predictions from a finished grid run, for the
/// zero-shot row of a baseline comparison.
pub fn zero_shot_predictions(
    run_dir: &Path,
) -> Result<(String, BTreeMap<String, RequirementLabel>), RunnerError> {
    let snapshot = read_snapshot(run_dir)?;
    if snapshot.kind != "grid" {
        return Err(RunnerError::BadRunArtifact(format!(
            "{} is a {} run, not a grid run",
            run_dir.display(),
            snapshot.kind
        )));
    }
    let corpus = read_run_corpus(run_dir)?;
    let records = read_results(run_dir)?;
    let bundle = build_reports(&corpus, &records, ErrorArtifacts::default())?;
    let Some(best) = &bundle.best_cell else {
        return Err(RunnerError::BadRunArtifact(format!(
            "{} has no evaluable grid cell to draw predictions from",
            run_dir.display()
        )));
    };
    let mut predictions = BTreeMap::new();
    for record in &records {
        if record.prompt_id == best.prompt_id
            && record.temperature.to_bits() == best.temperature.to_bits()
        {
            if let Some(label) = record.label {
                predictions.insert(record.review_id.clone(), label);
            }
        }
    }
    let name = format!("zero-shot {}@{}", best.prompt_id, best.temperature);
    Ok((name, predictions))
}

/// Reads an external predictions CSV (`review_id,label` header), e.g.
/// the output of some other classifier to include in the comparison.
pub fn load_external_predictions(
    reader: impl std::io::Read,
) -> Result<BTreeMap<String, RequirementLabel>, RunnerError> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| RunnerError::BadRunArtifact(e.to_string()))?
        .clone();
    let expected = ["review_id", "label"];
    if headers.iter().ne(expected) {
        return Err(RunnerError::BadRunArtifact(format!(
            "prediction file header must be {:?}, found {:?}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut predictions = BTreeMap::new();
    for row in csv.records() {
        let row = row.map_err(|e| RunnerError::BadRunArtifact(e.to_string()))?;
        let id = row.get(0).unwrap_or_default().to_string();
        let label: RequirementLabel = row
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e: crate::label::UnknownLabel| RunnerError::BadRunArtifact(e.to_string()))?;
        predictions.insert(id, label);
    }
    Ok(predictions)
}

#[derive(Debug)]
pub struct BaselineRunOutput {
    pub run_dir: PathBuf,
    pub rows: Vec<ComparisonRow>,
    pub summary: RunSummary,
    pub notices: Vec<String>,
    pub report_files: Vec<PathBuf>,
}

/// The persisted split, for auditability of baseline runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

async fn baseline_features(
    corpus: &Corpus,
    config: &RunConfig,
    cache_path: Option<PathBuf>,
    embedding_transport: Option<Arc<dyn EmbeddingTransport>>,
) -> Result<(FeatureMatrix, String), RunnerError> {
    match &config.features {
        FeatureConfig::Tfidf { max_vocab } => {
            let features = tfidf_features(corpus, *max_vocab)?;
            Ok((features.matrix, format!("tf-idf (max_vocab={max_vocab})")))
        }
        FeatureConfig::Embeddings {
            path: Some(path),
            model,
            dim,
            ..
        } => {
            let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
            let matrix = load_embeddings(BufReader::new(file), corpus)?;
            if matrix.dim() != *dim {
                return Err(RunnerError::Baseline(BaselineError::DimMismatch {
                    expected: *dim,
                    found: matrix.dim(),
                    context: format!("embedding file {}", path.display()),
                }));
            }
            Ok((matrix, format!("embeddings (model={model}, dim={dim})")))
        }
        FeatureConfig::Embeddings {
            path: None,
            model,
            dim,
            endpoint,
        } => {
            let transport: Arc<dyn EmbeddingTransport> = match embedding_transport {
                Some(t) => t,
                None => {
                    let api_key = std::env::var(&config.api_key_env).map_err(|_| {
                        GatewayError::MissingApiKey {
                            env_var: config.api_key_env.clone(),
                        }
                    })?;
                    Arc::new(HttpEmbeddingTransport::new(endpoint.clone(), api_key))
                }
            };
            let spec = EmbeddingsSpec {
                model: model.clone(),
                dim: *dim,
            };
            let matrix =
                fetch_embeddings(corpus, transport, &spec, config.gateway_config(cache_path))
                    .await?;
            Ok((matrix, format!("embeddings (model={model}, dim={dim})")))
        }
    }
}

/// Trains the classical baselines on the train split and evaluates
/// everything — baselines plus any extra named prediction sets — on the
/// identical test split.
pub async fn run_baseline(
    corpus: &Corpus,
    config: &RunConfig,
    run_dir: &Path,
    cache_path: Option<PathBuf>,
    extra_runs: Vec<(String, BTreeMap<String, RequirementLabel>)>,
    embedding_transport: Option<Arc<dyn EmbeddingTransport>>,
) -> Result<BaselineRunOutput, RunnerError> {
    config.validate()?;
    std::fs::create_dir_all(run_dir).map_err(|e| io_err(run_dir, e))?;

    let (train_ids, test_ids) = split(corpus, &config.split)?;
    let (features, feature_desc) =
        baseline_features(corpus, config, cache_path, embedding_transport).await?;
    let train_features = features.select(&train_ids)?;
    let test_features = features.select(&test_ids)?;

    let label_of = |ids: &[String]| -> Result<Vec<RequirementLabel>, RunnerError> {
        ids.iter()
            .map(|id| {
                corpus
                    .get(id)
                    .and_then(|r| r.gold_label)
                    .ok_or_else(|| RunnerError::Baseline(BaselineError::MissingGoldLabel(id.clone())))
            })
            .collect()
    };
    let train_labels = label_of(&train_ids)?;
    let test_labels = label_of(&test_ids)?;

    let logistic = train_logistic(&train_features, &train_labels, &config.logistic)?;
    let logistic_pred = logistic.predict(&test_features)?;
    let centroid = train_nearest_centroid(&train_features, &train_labels)?;
    let centroid_pred = centroid.predict(&test_features)?;

    let mut runs = vec![
        NamedRun {
            name: format!(
                "logistic-regression [{feature_desc}, lr={}, iters={}, l2={}]",
                config.logistic.learning_rate, config.logistic.iterations, config.logistic.l2
            ),
            gold: test_labels.clone(),
            pred: logistic_pred.into_iter().map(Some).collect(),
        },
        NamedRun {
            name: format!("nearest-centroid [{feature_desc}]"),
            gold: test_labels.clone(),
            pred: centroid_pred.into_iter().map(Some).collect(),
        },
    ];
    let mut notices = Vec::new();
    for (name, predictions) in &extra_runs {
        let pred: Vec<Option<RequirementLabel>> = test_ids
            .iter()
            .map(|id| predictions.get(id).copied())
            .collect();
        let n_missing = pred.iter().filter(|p| p.is_none()).count();
        if n_missing > 0 {
            notices.push(format!(
                "run {name:?}: {n_missing} of {} test reviews have no prediction; they count as unparsed",
                test_ids.len()
            ));
        }
        runs.push(NamedRun {
            name: name.clone(),
            gold: test_labels.clone(),
            pred,
        });
    }

    let rows = comparison_table(&runs)?;

    let (catalog, _) = prompt_specs(config)?;
    write_snapshot(run_dir, "baseline", config, &catalog, corpus)?;
    write_corpus_copy(run_dir, corpus)?;
    let split_path = run_dir.join("split.json");
    let mut split_json = serde_json::to_string_pretty(&SplitRecord {
        train_ids,
        test_ids: test_ids.clone(),
    })
    .map_err(|e| RunnerError::BadRunArtifact(e.to_string()))?;
    split_json.push('\n');
    std::fs::write(&split_path, split_json).map_err(|e| io_err(&split_path, e))?;

    let dir = run_dir.join(REPORTS_DIR);
    let report_files = write_all_formats(&dir, "comparison", |f| render_comparison(&rows, f))
        .map_err(|e| io_err(&dir, e))?;

    let n_unparsed: usize = rows.iter().map(|r| r.n_unparsed).sum();
    let summary = RunSummary {
        n_items: rows.iter().map(|r| r.n_evaluated + r.n_unparsed).sum(),
        n_completed: rows.iter().map(|r| r.n_evaluated).sum(),
        n_failed: 0,
        n_unparsed,
    };
    Ok(BaselineRunOutput {
        run_dir: run_dir.to_path_buf(),
        rows,
        summary,
        notices,
        report_files,
    })
}

#[derive(Debug)]
pub struct SampleErrorsOutput {
    pub path: PathBuf,
    pub sampled: Vec<Review>,
    pub notice: Option<String>,
    /// Cell the misclassifications came from.
    pub prompt_id: String,
    pub temperature: f64,
}

/// Samples misclassified reviews from a grid run's best cell and writes
/// the review-level worksheet (`error_sample.csv`). Tags are then
/// authored by hand into `error_tags.csv`.
pub fn sample_errors(run_dir: &Path, k: usize, seed: u64) -> Result<SampleErrorsOutput, RunnerError> {
    let snapshot = read_snapshot(run_dir)?;
    if snapshot.kind != "grid" {
        return Err(RunnerError::BadRunArtifact(format!(
            "{} is a {} run, not a grid run",
            run_dir.display(),
            snapshot.kind
        )));
    }
    let corpus = read_run_corpus(run_dir)?;
    let records = read_results(run_dir)?;
    let bundle = build_reports(&corpus, &records, ErrorArtifacts::default())?;
    let Some(best) = &bundle.best_cell else {
        return Err(RunnerError::BadRunArtifact(format!(
            "{} has no evaluable grid cell to sample from",
            run_dir.display()
        )));
    };

    let mut misclassified = Vec::new();
    let mut predicted_of: BTreeMap<String, RequirementLabel> = BTreeMap::new();
    for record in &records {
        if record.prompt_id != best.prompt_id
            || record.temperature.to_bits() != best.temperature.to_bits()
        {
            continue;
        }
        let Some(label) = record.label else { continue };
        let Some(review) = corpus.get(&record.review_id) else {
            continue;
        };
        let Some(gold) = review.gold_label else { continue };
        if label != gold {
            misclassified.push(review.clone());
            predicted_of.insert(review.id.clone(), label);
        }
    }

    let outcome = sample_misclassified(&misclassified, k, seed)?;
    let path = run_dir.join(ERROR_SAMPLE_FILE);
    let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut csv = csv::Writer::from_writer(file);
    csv.write_record(["review_id", "gold", "predicted", "text"])
        .map_err(|e| RunnerError::BadRunArtifact(e.to_string()))?;
    for review in &outcome.reviews {
        let gold = review.gold_label.expect("sampled from gold-labeled set");
        csv.write_record([
            review.id.as_str(),
            gold.as_str(),
            predicted_of[&review.id].as_str(),
            review.text.as_str(),
        ])
        .map_err(|e| RunnerError::BadRunArtifact(e.to_string()))?;
    }
    csv.flush().map_err(|e| io_err(&path, e))?;
    Ok(SampleErrorsOutput {
        path,
        sampled: outcome.reviews,
        notice: outcome.notice,
        prompt_id: best.prompt_id.clone(),
        temperature: best.temperature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockBackend, MockDefault};
    use RequirementLabel::*;

    fn labeled_review(id: &str, text: &str, gold: RequirementLabel) -> Review {
        Review::new(id, text).with_gold_label(gold)
    }

    fn tiny_corpus() -> Corpus {
        Corpus::new(
            vec![
                labeled_review("r1", "Please add a dark mode toggle to the settings", Functional),
                labeled_review("r2", "The app crashes constantly and runs very slow", NonFunctional),
                labeled_review("r3", "Add offline sync but also fix the awful lag", Both),
                labeled_review("r4", "I love my cat and this has nothing to do here", Neither),
            ],
            "unit-test corpus",
        )
    }

    fn scripted_backend() -> Arc<MockBackend> {
        let mock = MockBackend::new(MockDefault::Unparsed);
        mock.seed_substring_rule("dark mode toggle", "functional");
        mock.seed_substring_rule("crashes constantly", "non-functional");
        mock.seed_substring_rule("offline sync", "both functional and non-functional requirements");
        mock.seed_substring_rule("love my cat", "neither");
        Arc::new(mock)
    }

    fn one_cell_config() -> RunConfig {
        RunConfig {
            prompts: vec!["P1".to_string()],
            temperatures: vec![0.2],
            mock: crate::config::MockConfig {
                enabled: true,
                responses_path: None,
            },
            ..RunConfig::default()
        }
    }

    #[tokio::test]
    async fn grid_run_writes_a_complete_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("run-001");
        let output = run_grid(
            &tiny_corpus(),
            &one_cell_config(),
            scripted_backend(),
            &run_dir,
            Some(dir.path().join("cache.jsonl")),
        )
        .await
        .unwrap();

        assert_eq!(output.summary.n_items, 4);
        assert_eq!(output.summary.n_failed, 0);
        assert_eq!(output.summary.n_unparsed, 0);
        assert!(run_dir.join(SNAPSHOT_FILE).exists());
        assert!(run_dir.join(CORPUS_FILE).exists());
        assert!(run_dir.join(RESULTS_FILE).exists());
        // grid + per_class + readability_group + per_class_fkgl, three
        // formats each; error_frequency omitted (no tags).
        assert_eq!(output.report_files.len(), 12);
        let row = &output.bundle.grid.rows[0];
        assert_eq!(row.micro_f1, Some(1.0));
        assert_eq!(row.n_evaluated, 4);
    }

    #[tokio::test]
    async fn rerun_from_cache_is_byte_identical_with_zero_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Some(dir.path().join("cache.jsonl"));
        let corpus = tiny_corpus();
        let config = one_cell_config();

        let first_dir = dir.path().join("run-001");
        run_grid(&corpus, &config, scripted_backend(), &first_dir, cache.clone())
            .await
            .unwrap();
        let read_all = |run: &Path| -> Vec<(String, Vec<u8>)> {
            let mut files = vec![
                (RESULTS_FILE.to_string(), std::fs::read(run.join(RESULTS_FILE)).unwrap()),
                (SNAPSHOT_FILE.to_string(), std::fs::read(run.join(SNAPSHOT_FILE)).unwrap()),
            ];
            let mut names: Vec<_> = std::fs::read_dir(run.join(REPORTS_DIR))
                .unwrap()
                .map(|e| e.unwrap().file_name().into_string().unwrap())
                .collect();
            names.sort();
            for name in names {
                files.push((
                    name.clone(),
                    std::fs::read(run.join(REPORTS_DIR).join(&name)).unwrap(),
                ));
            }
            files
        };
        let first = read_all(&first_dir);

        // Fresh backend with no scripts: every answer must come from
        // the cache, not the backend.
        let cold = Arc::new(MockBackend::new(MockDefault::Unparsed));
        let second_dir = dir.path().join("run-002");
        run_grid(&corpus, &config, cold.clone(), &second_dir, cache)
            .await
            .unwrap();
        assert_eq!(cold.calls(), 0, "warm cache serves every request");
        assert_eq!(first, read_all(&second_dir));
    }

    #[tokio::test]
    async fn regeneration_after_deleting_reports_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("run-001");
        run_grid(
            &tiny_corpus(),
            &one_cell_config(),
            scripted_backend(),
            &run_dir,
            None,
        )
        .await
        .unwrap();
        let grid_md = run_dir.join(REPORTS_DIR).join("grid.md");
        let before = std::fs::read(&grid_md).unwrap();
        std::fs::remove_dir_all(run_dir.join(REPORTS_DIR)).unwrap();

        let outcome = regenerate_reports(&run_dir).unwrap();
        assert_eq!(std::fs::read(&grid_md).unwrap(), before);
        assert!(outcome
            .bundle
            .notices
            .iter()
            .any(|n| n.contains("error-frequency table omitted")));
    }

    #[tokio::test]
    async fn failures_are_isolated_and_counted() {
        let mock = MockBackend::new(MockDefault::Unparsed);
        mock.seed_substring_rule("dark mode toggle", "functional");
        mock.seed_substring_rule("crashes constantly", "non-functional");
        mock.seed_substring_rule("offline sync", "both types of requirements");
        // r4 gets the Unparsed default → counted as unparsed, not failed.
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("run-001");
        let output = run_grid(
            &tiny_corpus(),
            &one_cell_config(),
            Arc::new(mock),
            &run_dir,
            None,
        )
        .await
        .unwrap();
        assert_eq!(output.summary.n_unparsed, 1);
        assert_eq!(output.summary.n_failed, 0);
        assert!(output.summary.is_partial());
        let row = &output.bundle.grid.rows[0];
        assert_eq!(row.n_evaluated, 3);
        assert_eq!(row.n_unparsed, 1);
    }

    #[test]
    fn unknown_run_directory_is_a_named_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = regenerate_reports(&dir.path().join("nope")).unwrap_err();
        assert!(err.to_string().contains("UNKNOWN_RUN_DIRECTORY"));
    }

    #[tokio::test]
    async fn baseline_run_produces_comparison_rows() {
        // Twelve reviews, three per class, with vocabulary so aligned
        // that tf-idf features are linearly separable.
        let mut reviews = Vec::new();
        for i in 0..3 {
            reviews.push(labeled_review(
                &format!("f{i}"),
                "please add export feature button",
                Functional,
            ));
            reviews.push(labeled_review(
                &format!("n{i}"),
                "app slow crash lag performance",
                NonFunctional,
            ));
            reviews.push(labeled_review(
                &format!("b{i}"),
                "add feature but fix crash lag",
                Both,
            ));
            reviews.push(labeled_review(
                &format!("x{i}"),
                "my cat walked across the keyboard",
                Neither,
            ));
        }
        let corpus = Corpus::new(reviews, "baseline-test");
        let config = RunConfig {
            split: crate::baselines::SplitSpec {
                train_fraction: 0.75,
                seed: 7,
                stratified: true,
            },
            ..RunConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("baseline-001");
        let mut zero_shot = BTreeMap::new();
        for review in &corpus.reviews {
            zero_shot.insert(review.id.clone(), review.gold_label.unwrap());
        }
        let output = run_baseline(
            &corpus,
            &config,
            &run_dir,
            None,
            vec![("zero-shot oracle".to_string(), zero_shot)],
            None,
        )
        .await
        .unwrap();
        assert_eq!(output.rows.len(), 3);
        assert!(output.rows[0].name.starts_with("logistic-regression"));
        assert_eq!(output.rows[2].micro.f1, 1.0, "oracle row is perfect");
        assert_eq!(output.rows[2].n_evaluated, 4, "evaluated on the test split only");
        assert!(run_dir.join("split.json").exists());
        assert_eq!(output.report_files.len(), 3);
    }

    #[tokio::test]
    async fn zero_shot_predictions_come_from_the_best_cell() {
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("run-001");
        run_grid(
            &tiny_corpus(),
            &one_cell_config(),
            scripted_backend(),
            &run_dir,
            None,
        )
        .await
        .unwrap();
        let (name, predictions) = zero_shot_predictions(&run_dir).unwrap();
        assert_eq!(name, "zero-shot P1@0.2");
        assert_eq!(predictions.len(), 4);
        assert_eq!(predictions["r1"], Functional);
    }

    #[tokio::test]
    async fn error_sampling_writes_the_worksheet_and_feeds_the_report() {
        // Backend that misclassifies r1 and r4.
        let mock = MockBackend::new(MockDefault::Unparsed);
        mock.seed_substring_rule("dark mode toggle", "non-functional");
        mock.seed_substring_rule("crashes constantly", "non-functional");
        mock.seed_substring_rule("offline sync", "both categories");
        mock.seed_substring_rule("love my cat", "functional");
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("run-001");
        run_grid(
            &tiny_corpus(),
            &one_cell_config(),
            Arc::new(mock),
            &run_dir,
            None,
        )
        .await
        .unwrap();

        let output = sample_errors(&run_dir, 10, 42).unwrap();
        assert_eq!(output.sampled.len(), 2, "two misclassified reviews");
        assert!(output.notice.is_some(), "k larger than population is disclosed");
        assert!(output.path.exists());

        // Author tags for one of the sampled reviews, regenerate, and
        // the error table appears with the other review listed untagged.
        std::fs::write(
            run_dir.join(ERROR_TAGS_FILE),
            "review_id,category,note,tagger\nr1,NEGATIVE_SENTIMENT_BIAS,,t1\n",
        )
        .unwrap();
        let outcome = regenerate_reports(&run_dir).unwrap();
        let errors = outcome.bundle.errors.expect("error table present");
        assert_eq!(errors.total_tags, 1);
        assert_eq!(errors.untagged.len(), 1);
    }

    #[test]
    fn run_dir_allocation_is_sequential() {
        let dir = tempfile::tempdir().unwrap();
        let first = allocate_run_dir(dir.path()).unwrap();
        assert!(first.ends_with("run-001"));
        std::fs::create_dir_all(&first).unwrap();
        let second = allocate_run_dir(dir.path()).unwrap();
        assert!(second.ends_with("run-002"));
    }

    #[test]
    fn external_predictions_round_trip() {
        let csv = "review_id,label\nr1,functional\nr2,non_functional\n";
        let predictions = load_external_predictions(csv.as_bytes()).unwrap();
        assert_eq!(predictions["r1"], Functional);
        assert_eq!(predictions["r2"], NonFunctional);
        assert!(load_external_predictions("id,label\nr1,functional\n".as_bytes()).is_err());
        assert!(load_external_predictions("review_id,label\nr1,banana\n".as_bytes()).is_err());
    }
}
