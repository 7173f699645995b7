//! Black-box tests of the `revclass` binary: the full mock workflow,
//! exit codes, and the error paths a script would depend on.

use std::path::Path;
use std::process::{Command, Output};

fn revclass(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revclass"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout_of(output),
        stderr_of(output)
    );
}

/// Eight reviews, two per class, with distinctive texts the mock rules
/// key on; plus one too-short and one German review for ingest to drop.
fn write_raw_corpus(path: &Path) {
    let lines = [
        r#"{"id": "r1", "text": "Please add a sleep timer to the player", "language": "en", "gold_label": "functional"}"#,
        r#"{"id": "r2", "text": "Let me pin my favorite channels on top", "language": "en", "gold_label": "functional"}"#,
        r#"{"id": "r3", "text": "The app freezes whenever I switch networks", "language": "en", "gold_label": "non_functional"}"#,
        r#"{"id": "r4", "text": "Scrolling stutters badly on long threads", "language": "en", "gold_label": "non_functional"}"#,
        r#"{"id": "r5", "text": "Add bulk delete and stop the gallery from lagging", "language": "en", "gold_label": "both"}"#,
        r#"{"id": "r6", "text": "I need group chats but the current ones crash hourly", "language": "en", "gold_label": "both"}"#,
        r#"{"id": "r7", "text": "Reminds me of the old days somehow honestly", "language": "en", "gold_label": "neither"}"#,
        r#"{"id": "r8", "text": "Greetings from my whole family to the developers", "language": "en", "gold_label": "neither"}"#,
        r#"{"id": "r9", "text": "ok", "language": "en", "gold_label": "neither"}"#,
        r#"{"id": "r10", "text": "Die App ist wirklich ziemlich gut gelungen", "language": "de", "gold_label": "neither"}"#,
    ];
    std::fs::write(path, lines.join("\n")).unwrap();
}

/// Scripted mock replies: seven correct, r6 (gold both) misread as
/// functional so the run has exactly one misclassification.
fn write_mock_rules(path: &Path) {
    let rules = [
        (r"sleep timer", "functional"),
        (r"pin my favorite", "functional"),
        (r"freezes whenever", "non-functional"),
        (r"Scrolling stutters", "non-functional"),
        (r"bulk delete", "both"),
        (r"group chats", "functional"),
        (r"old days", "neither"),
        (r"whole family", "none"),
    ];
    let lines: Vec<String> = rules
        .iter()
        .map(|(user_contains, response)| {
            serde_json::json!({"user_contains": user_contains, "response": response}).to_string()
        })
        .collect();
    std::fs::write(path, lines.join("\n")).unwrap();
}

fn write_config(path: &Path, rules_path: &Path) {
    let config = format!(
        "prompts = [\"P1\"]\ntemperatures = [0.2]\n\n[mock]\nenabled = true\nresponses_path = {:?}\n",
        rules_path.display().to_string()
    );
    std::fs::write(path, config).unwrap();
}

#[test]
fn mock_workflow_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_raw_corpus(&root.join("raw.jsonl"));
    write_mock_rules(&root.join("rules.jsonl"));
    write_config(&root.join("config.toml"), &root.join("rules.jsonl"));

    // Ingest: drop the German and the two-word review.
    let ingest = revclass(
        root,
        &[
            "ingest",
            "--corpus",
            "raw.jsonl",
            "--output",
            "curated.jsonl",
            "--language",
            "en",
            "--min-words",
            "3",
        ],
    );
    assert_exit(&ingest, 0);
    let ingest_out = stdout_of(&ingest);
    assert!(ingest_out.contains("wrote 8 review(s)"), "{ingest_out}");

    // Classify the curated corpus against the scripted mock.
    let classify = revclass(
        root,
        &[
            "--config",
            "config.toml",
            "--corpus",
            "curated.jsonl",
            "--out",
            "runs",
            "classify",
        ],
    );
    assert_exit(&classify, 0);
    let classify_out = stdout_of(&classify);
    assert!(
        classify_out.contains("items: 8 | completed: 8 | failed: 0 | unparsed: 0"),
        "{classify_out}"
    );
    assert!(classify_out.contains("P1"), "{classify_out}");

    let run_dir = root.join("runs/run-001");
    assert!(run_dir.join("snapshot.json").exists());
    assert!(run_dir.join("results.jsonl").exists());
    assert!(run_dir.join("reports/grid.md").exists());

    // Evaluate re-derives the tables from the run directory alone.
    let evaluate = revclass(root, &["evaluate", "--run", "runs/run-001"]);
    assert_exit(&evaluate, 0);
    let evaluate_out = stdout_of(&evaluate);
    assert!(
        evaluate_out.contains("0.8750"),
        "7 of 8 correct should show micro 0.875: {evaluate_out}"
    );

    // Readability over the run: both group and per-class tables print.
    let readability = revclass(root, &["readability", "--run", "runs/run-001"]);
    assert_exit(&readability, 0);
    let readability_out = stdout_of(&readability);
    assert!(
        readability_out.contains("Readability by classification outcome"),
        "{readability_out}"
    );
    assert!(
        readability_out.contains("Readability by class"),
        "{readability_out}"
    );

    // Sample the single misclassified review into the worksheet.
    let sample = revclass(root, &["sample-errors", "--run", "runs/run-001", "--k", "5"]);
    assert_exit(&sample, 0);
    let sample_out = stdout_of(&sample);
    assert!(
        sample_out.contains("sampled 1 misclassified review(s) from P1@0.2"),
        "{sample_out}"
    );
    let worksheet = std::fs::read_to_string(run_dir.join("error_sample.csv")).unwrap();
    assert!(worksheet.contains("r6"), "{worksheet}");

    // Tag it and regenerate: the error-frequency table appears.
    std::fs::write(
        run_dir.join("error_tags.csv"),
        "review_id,category,note,tagger\nr6,OVERLAPPING_CHARACTERISTICS,reads as a feature ask,annotator-1\n",
    )
    .unwrap();
    let report = revclass(root, &["report", "--run", "runs/run-001"]);
    assert_exit(&report, 0);
    let report_out = stdout_of(&report);
    assert!(
        report_out.contains("error_frequency.md"),
        "{report_out}"
    );
    let frequency = std::fs::read_to_string(run_dir.join("reports/error_frequency.csv")).unwrap();
    assert!(
        frequency.contains("Overlapping Characteristics,1"),
        "{frequency}"
    );

    // Baselines on the same corpus, with the grid's best cell invited
    // into the comparison.
    let baseline = revclass(
        root,
        &[
            "--config",
            "config.toml",
            "--corpus",
            "curated.jsonl",
            "--out",
            "runs",
            "baseline",
            "--zero-shot-from",
            "runs/run-001",
        ],
    );
    assert_exit(&baseline, 0);
    let baseline_out = stdout_of(&baseline);
    assert!(
        baseline_out.contains("logistic-regression"),
        "{baseline_out}"
    );
    assert!(baseline_out.contains("nearest-centroid"), "{baseline_out}");
    assert!(baseline_out.contains("zero-shot P1@0.2"), "{baseline_out}");
    assert!(root.join("runs/run-002/split.json").exists());
}

#[test]
fn unparsed_items_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_raw_corpus(&root.join("raw.jsonl"));

    // One rule answers gibberish, so that review stays unparsed.
    let rules: Vec<String> = [
        (r"sleep timer", "functional"),
        (r"pin my favorite", "functional"),
        (r"freezes whenever", "non-functional"),
        (r"Scrolling stutters", "non-functional"),
        (r"bulk delete", "both"),
        (r"group chats", "both"),
        (r"old days", "neither"),
        (r"whole family", "I really cannot decide on this one."),
    ]
    .iter()
    .map(|(user_contains, response)| {
        serde_json::json!({"user_contains": user_contains, "response": response}).to_string()
    })
    .collect();
    std::fs::write(root.join("rules.jsonl"), rules.join("\n")).unwrap();
    write_config(&root.join("config.toml"), &root.join("rules.jsonl"));

    let ingest = revclass(
        root,
        &[
            "ingest",
            "--corpus",
            "raw.jsonl",
            "--output",
            "curated.jsonl",
            "--language",
            "en",
            "--min-words",
            "3",
        ],
    );
    assert_exit(&ingest, 0);

    let classify = revclass(
        root,
        &[
            "--config",
            "config.toml",
            "--corpus",
            "curated.jsonl",
            "--out",
            "runs",
            "classify",
        ],
    );
    assert_exit(&classify, 2);
    assert!(
        stdout_of(&classify).contains("unparsed: 1"),
        "{}",
        stdout_of(&classify)
    );
}

#[test]
fn reconcile_reports_agreement_and_writes_gold_labels() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_raw_corpus(&root.join("raw.jsonl"));
    let ingest = revclass(
        root,
        &[
            "ingest",
            "--corpus",
            "raw.jsonl",
            "--output",
            "curated.jsonl",
            "--min-words",
            "3",
        ],
    );
    assert_exit(&ingest, 0);

    // r1 and r3 reach a 2-of-3 majority; r5 splits three ways.
    let annotations = [
        r#"{"review_id": "r1", "votes": ["functional", "functional", "non_functional"]}"#,
        r#"{"review_id": "r3", "votes": ["non_functional", "non_functional", "non_functional"]}"#,
        r#"{"review_id": "r5", "votes": ["functional", "non_functional", "both"]}"#,
    ];
    std::fs::write(root.join("votes.jsonl"), annotations.join("\n")).unwrap();

    let reconcile = revclass(
        root,
        &[
            "--corpus",
            "curated.jsonl",
            "reconcile",
            "--annotations",
            "votes.jsonl",
            "--output",
            "gold.jsonl",
            "--quorum",
            "2",
        ],
    );
    assert_exit(&reconcile, 0);
    let out = stdout_of(&reconcile);
    assert!(out.contains("Fleiss' kappa:"), "{out}");
    assert!(out.contains("2 labeled, 1 excluded"), "{out}");
    assert!(out.contains("wrote 2 gold-labeled review(s)"), "{out}");

    let gold = std::fs::read_to_string(root.join("gold.jsonl")).unwrap();
    assert!(gold.contains(r#""gold_label":"functional""#) || gold.contains(r#""gold_label": "functional""#), "{gold}");
    assert_eq!(gold.trim().lines().count(), 2, "{gold}");
}

#[test]
fn fatal_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Evaluate on a directory that is not a run.
    std::fs::create_dir(root.join("not-a-run")).unwrap();
    let evaluate = revclass(root, &["evaluate", "--run", "not-a-run"]);
    assert_exit(&evaluate, 1);
    assert!(
        stderr_of(&evaluate).contains("UNKNOWN_RUN_DIRECTORY"),
        "{}",
        stderr_of(&evaluate)
    );

    // Classify without a corpus.
    let classify = revclass(root, &["--mock", "classify"]);
    assert_exit(&classify, 1);
    assert!(
        stderr_of(&classify).contains("--corpus"),
        "{}",
        stderr_of(&classify)
    );

    // Malformed --predictions flag on baseline.
    std::fs::write(root.join("c.jsonl"), r#"{"id": "a", "text": "some words here", "gold_label": "functional"}"#).unwrap();
    let baseline = revclass(
        root,
        &[
            "--corpus",
            "c.jsonl",
            "baseline",
            "--predictions",
            "missing-equals-sign",
        ],
    );
    assert_exit(&baseline, 1);
    assert!(
        stderr_of(&baseline).contains("NAME=PATH"),
        "{}",
        stderr_of(&baseline)
    );

    // Unknown flags are usage errors.
    let unknown = revclass(root, &["--definitely-not-a-flag"]);
    assert_exit(&unknown, 1);
}

#[test]
fn help_and_version_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let help = revclass(dir.path(), &["--help"]);
    assert_exit(&help, 0);
    let help_out = stdout_of(&help);
    for subcommand in [
        "ingest",
        "reconcile",
        "classify",
        "evaluate",
        "readability",
        "baseline",
        "sample-errors",
        "report",
    ] {
        assert!(help_out.contains(subcommand), "{help_out}");
    }

    let version = revclass(dir.path(), &["--version"]);
    assert_exit(&version, 0);
    assert!(stdout_of(&version).contains("revclass"));
}
