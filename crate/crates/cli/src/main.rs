//! Command-line workflow for review requirement classification:
//! ingest → reconcile → classify (grid) → evaluate → readability →
//! baseline → sample-errors → report.
//!
//! Exit codes: 0 success, 2 partial (some items failed or were
//! unparsed), 1 fatal.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use revclass_core::config::RunConfig;
use revclass_core::corpus::{
    self, apply_curation_filters, filter_language, fleiss_kappa, read_annotations_jsonl,
    reconcile, CorpusFormat,
};
use revclass_core::label::RequirementLabel;
use revclass_core::readability::per_class_fkgl;
use revclass_core::report::{
    render_cell_per_class, render_comparison, render_error_frequency, render_grid,
    render_group_comparison, render_per_class_fkgl, ReportFormat,
};
use revclass_core::runner::{
    allocate_run_dir, build_backend, build_reports, load_corpus_file, load_error_artifacts,
    load_external_predictions, read_results, read_run_corpus, read_snapshot, regenerate_reports,
    run_baseline, run_grid, sample_errors, summarize_records, zero_shot_predictions, RunSummary,
};
use revclass_core::taxonomy::ErrorCategory;
use revclass_core::Corpus;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "revclass", version, about = "Classify app reviews into requirement categories and evaluate the results")]
struct Cli {
    /// Run configuration file (TOML or JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Corpus file (JSONL, or CSV by extension).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Use the scripted mock backend instead of the network.
    #[arg(long, global = true)]
    mock: bool,

    /// Override the configured seed (sampling and splits).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output root; run directories are allocated beneath it.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a raw corpus file, apply curation filters, write curated JSONL.
    Ingest {
        /// Where to write the curated corpus.
        #[arg(long)]
        output: PathBuf,
        /// Keep only reviews whose language field equals this code.
        #[arg(long)]
        language: Option<String>,
        /// Minimum words per review (default from config).
        #[arg(long)]
        min_words: Option<usize>,
    },
    /// Compute inter-annotator agreement and majority-vote gold labels.
    Reconcile {
        /// Annotation votes, one JSON object per line.
        #[arg(long)]
        annotations: PathBuf,
        /// Where to write the gold-labeled corpus.
        #[arg(long)]
        output: PathBuf,
        /// Votes required to keep a review (default from config).
        #[arg(long)]
        quorum: Option<usize>,
    },
    /// Run the full prompt × temperature grid over the corpus.
    Classify,
    /// Recompute and print the evaluation tables of a finished run.
    Evaluate {
        /// Run directory produced by `classify`.
        #[arg(long)]
        run: PathBuf,
    },
    /// Readability analysis: per-class FKGL, plus correct-vs-misclassified
    /// groups when a run directory is given.
    Readability {
        /// Run directory produced by `classify`.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Train classical baselines and compare them on one test split.
    Baseline {
        /// Grid run directory whose best cell joins the comparison.
        #[arg(long)]
        zero_shot_from: Option<PathBuf>,
        /// Extra prediction files to compare, as name=path.csv
        /// (CSV header: review_id,label). Repeatable.
        #[arg(long = "predictions", value_name = "NAME=PATH")]
        predictions: Vec<String>,
    },
    /// Sample misclassified reviews from a run into a tagging worksheet.
    SampleErrors {
        /// Run directory produced by `classify`.
        #[arg(long)]
        run: PathBuf,
        /// How many misclassified reviews to sample.
        #[arg(long, default_value_t = 100)]
        k: usize,
    },
    /// Regenerate every report table of a run directory from its artifacts.
    Report {
        /// Run directory produced by `classify`.
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let fatal = e.use_stderr();
            let _ = e.print();
            std::process::exit(if fatal { 1 } else { 0 });
        }
    };
    let code = match tokio::runtime::Runtime::new()
        .map_err(anyhow::Error::from)
        .and_then(|rt| rt.block_on(dispatch(cli)))
    {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

async fn dispatch(cli: Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.mock {
        config.mock.enabled = true;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.split.seed = seed;
    }

    match &cli.command {
        Command::Ingest {
            output,
            language,
            min_words,
        } => cmd_ingest(&cli, &config, output, language.as_deref(), *min_words),
        Command::Reconcile {
            annotations,
            output,
            quorum,
        } => cmd_reconcile(&cli, &config, annotations, output, *quorum),
        Command::Classify => cmd_classify(&cli, &config).await,
        Command::Evaluate { run } => cmd_evaluate(run),
        Command::Readability { run } => cmd_readability(&cli, run.as_deref()),
        Command::Baseline {
            zero_shot_from,
            predictions,
        } => cmd_baseline(&cli, &config, zero_shot_from.as_deref(), predictions).await,
        Command::SampleErrors { run, k } => cmd_sample_errors(&cli, run, *k),
        Command::Report { run } => cmd_report(run),
    }
}

fn require_corpus(cli: &Cli) -> Result<Corpus> {
    let path = cli
        .corpus
        .as_ref()
        .context("--corpus <path> is required for this command")?;
    Ok(load_corpus_file(path)?)
}

fn exit_code(summary: &RunSummary) -> i32 {
    if summary.is_partial() {
        2
    } else {
        0
    }
}

fn print_summary(summary: &RunSummary) {
    println!(
        "items: {} | completed: {} | failed: {} | unparsed: {}",
        summary.n_items, summary.n_completed, summary.n_failed, summary.n_unparsed
    );
}

fn cmd_ingest(
    cli: &Cli,
    config: &RunConfig,
    output: &Path,
    language: Option<&str>,
    min_words: Option<usize>,
) -> Result<i32> {
    let path = cli
        .corpus
        .as_ref()
        .context("--corpus <path> names the raw input file for ingest")?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => CorpusFormat::Csv,
        _ => CorpusFormat::Jsonl,
    };
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open corpus file {}", path.display()))?;
    let outcome = corpus::ingest(file, format, &path.display().to_string())?;
    for reject in &outcome.rejects {
        eprintln!("rejected record at line {}: {}", reject.line, reject.reason);
    }

    let mut curated = outcome.corpus;
    if let Some(lang) = language {
        let (kept, dropped) = filter_language(&curated, lang);
        println!("language filter ({lang}): kept {}, dropped {}", kept.len(), dropped.len());
        curated = kept;
    }
    let min_words = min_words.unwrap_or(config.min_words);
    let (curated, too_short) = apply_curation_filters(&curated, min_words);
    println!(
        "length filter (>= {min_words} words): kept {}, dropped {}",
        curated.len(),
        too_short.len()
    );

    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let out_file = std::fs::File::create(output)
        .with_context(|| format!("cannot write {}", output.display()))?;
    corpus::export_jsonl(&curated, out_file)?;
    println!("wrote {} review(s) to {}", curated.len(), output.display());
    if let Ok(counts) = curated.class_counts() {
        for (label, count) in counts {
            println!("  {}: {}", label.as_str(), count);
        }
    }
    Ok(if outcome.rejects.is_empty() { 0 } else { 2 })
}

fn cmd_reconcile(
    cli: &Cli,
    config: &RunConfig,
    annotations_path: &Path,
    output: &Path,
    quorum: Option<usize>,
) -> Result<i32> {
    let corpus = require_corpus(cli)?;
    let file = std::fs::File::open(annotations_path)
        .with_context(|| format!("cannot open {}", annotations_path.display()))?;
    let annotations = read_annotations_jsonl(file)?;
    if annotations.is_empty() {
        bail!("{} holds no annotation sets", annotations_path.display());
    }

    match fleiss_kappa(&annotations, RequirementLabel::ALL.len()) {
        Ok(kappa) => println!("Fleiss' kappa: {kappa:.4} over {} item(s)", annotations.len()),
        Err(e) => println!("Fleiss' kappa unavailable: {e}"),
    }

    let quorum = quorum.unwrap_or(config.quorum);
    let (gold, excluded) = reconcile(&annotations, quorum);
    println!(
        "majority vote (quorum {quorum}): {} labeled, {} excluded",
        gold.len(),
        excluded.len()
    );

    let keep: Vec<String> = corpus
        .reviews
        .iter()
        .filter(|r| gold.contains_key(&r.id))
        .map(|r| r.id.clone())
        .collect();
    let mut labeled = corpus.retain_ids(&keep);
    labeled.apply_gold_labels(&gold);

    let missing = gold.len() - labeled.len();
    if missing > 0 {
        eprintln!("warning: {missing} annotated review id(s) are absent from the corpus");
    }

    let out_file = std::fs::File::create(output)
        .with_context(|| format!("cannot write {}", output.display()))?;
    corpus::export_jsonl(&labeled, out_file)?;
    println!("wrote {} gold-labeled review(s) to {}", labeled.len(), output.display());
    if let Ok(counts) = labeled.class_counts() {
        for (label, count) in counts {
            println!("  {}: {}", label.as_str(), count);
        }
    }
    Ok(0)
}

fn resolve_cache_path(cli: &Cli, config: &RunConfig) -> PathBuf {
    config
        .cache_path
        .clone()
        .unwrap_or_else(|| cli.out.join("cache.jsonl"))
}

async fn cmd_classify(cli: &Cli, config: &RunConfig) -> Result<i32> {
    let corpus = require_corpus(cli)?;
    let backend = build_backend(config)?;
    let run_dir = allocate_run_dir(&cli.out)?;
    let cache_path = resolve_cache_path(cli, config);
    let output = run_grid(&corpus, config, backend, &run_dir, Some(cache_path)).await?;

    println!("run directory: {}", output.run_dir.display());
    print_summary(&output.summary);
    println!();
    print!("{}", render_grid(&output.bundle.grid, ReportFormat::Markdown));
    for notice in &output.bundle.notices {
        println!("note: {notice}");
    }
    Ok(exit_code(&output.summary))
}

fn cmd_evaluate(run_dir: &Path) -> Result<i32> {
    read_snapshot(run_dir)?;
    let corpus = read_run_corpus(run_dir)?;
    let records = read_results(run_dir)?;
    let bundle = build_reports(&corpus, &records, load_error_artifacts(run_dir)?)?;
    let summary = summarize_records(&records);

    print_summary(&summary);
    println!();
    print!("{}", render_grid(&bundle.grid, ReportFormat::Markdown));
    if let Some(cell) = &bundle.best_cell {
        println!();
        print!("{}", render_cell_per_class(cell, ReportFormat::Markdown));
    }
    if let Some(errors) = &bundle.errors {
        println!();
        print!("{}", render_error_frequency(errors, ReportFormat::Markdown));
    }
    for notice in &bundle.notices {
        println!("note: {notice}");
    }
    Ok(0)
}

fn cmd_readability(cli: &Cli, run_dir: Option<&Path>) -> Result<i32> {
    match run_dir {
        Some(run_dir) => {
            read_snapshot(run_dir)?;
            let corpus = read_run_corpus(run_dir)?;
            let records = read_results(run_dir)?;
            let bundle = build_reports(&corpus, &records, load_error_artifacts(run_dir)?)?;
            if let Some(group) = &bundle.group {
                print!("{}", render_group_comparison(group, ReportFormat::Markdown));
                println!();
            }
            if let Some(fkgl) = &bundle.fkgl {
                print!("{}", render_per_class_fkgl(fkgl, ReportFormat::Markdown));
            }
            for notice in &bundle.notices {
                println!("note: {notice}");
            }
        }
        None => {
            let corpus = require_corpus(cli)?;
            let labeled: Vec<_> = corpus
                .reviews
                .iter()
                .filter(|r| r.gold_label.is_some())
                .cloned()
                .collect();
            if labeled.is_empty() {
                bail!("corpus has no gold-labeled reviews to analyse");
            }
            let report = per_class_fkgl(&labeled)?;
            print!("{}", render_per_class_fkgl(&report, ReportFormat::Markdown));
        }
    }
    Ok(0)
}

async fn cmd_baseline(
    cli: &Cli,
    config: &RunConfig,
    zero_shot_from: Option<&Path>,
    predictions: &[String],
) -> Result<i32> {
    let corpus = require_corpus(cli)?;
    let mut extra_runs: Vec<(String, BTreeMap<String, RequirementLabel>)> = Vec::new();
    if let Some(grid_dir) = zero_shot_from {
        extra_runs.push(zero_shot_predictions(grid_dir)?);
    }
    for spec in predictions {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("--predictions {spec:?} is not NAME=PATH"))?;
        let file = std::fs::File::open(path)
            .with_context(|| format!("cannot open prediction file {path}"))?;
        extra_runs.push((name.to_string(), load_external_predictions(file)?));
    }

    let run_dir = allocate_run_dir(&cli.out)?;
    let cache_path = resolve_cache_path(cli, config);
    let output = run_baseline(&corpus, config, &run_dir, Some(cache_path), extra_runs, None).await?;

    println!("run directory: {}", output.run_dir.display());
    print!("{}", render_comparison(&output.rows, ReportFormat::Markdown));
    for notice in &output.notices {
        println!("note: {notice}");
    }
    Ok(exit_code(&output.summary))
}

fn cmd_sample_errors(cli: &Cli, run_dir: &Path, k: usize) -> Result<i32> {
    let snapshot = read_snapshot(run_dir)?;
    let seed = cli.seed.unwrap_or(snapshot.config.seed);
    let output = sample_errors(run_dir, k, seed)?;
    println!(
        "sampled {} misclassified review(s) from {}@{} into {}",
        output.sampled.len(),
        output.prompt_id,
        output.temperature,
        output.path.display()
    );
    if let Some(notice) = &output.notice {
        println!("note: {notice}");
    }
    println!();
    println!("Next: author {}/error_tags.csv with header review_id,category,note,tagger.", run_dir.display());
    println!("Categories:");
    for category in ErrorCategory::ALL {
        println!("  {} — {}", category.as_str(), category.description());
    }
    println!("Then rerun `revclass report --run {}` to include the frequency table.", run_dir.display());
    Ok(0)
}

fn cmd_report(run_dir: &Path) -> Result<i32> {
    let outcome = regenerate_reports(run_dir)?;
    for file in &outcome.files {
        println!("wrote {}", file.display());
    }
    for notice in &outcome.bundle.notices {
        println!("note: {notice}");
    }
    Ok(0)
}
