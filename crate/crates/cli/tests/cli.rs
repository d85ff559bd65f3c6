//! End-to-end CLI behavior: exit codes, output files, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use homeval::domain::{AgentResponse, Producer};
use homeval::scenario::{self, generate_batch, GenerationConfig, TemplateBank};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homeval"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_ok(args: &[&str]) -> Output {
    let output = bin().args(args).output().expect("spawn homeval");
    assert!(
        output.status.success(),
        "command {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

/// Writes a small entries + echo-responses pair for eval tests.
fn write_eval_inputs(dir: &Path, total: usize, seed: u64) -> (PathBuf, PathBuf) {
    let config = GenerationConfig {
        total,
        seed,
        ..Default::default()
    };
    let batch = generate_batch(&config, &TemplateBank::builtin()).unwrap();
    let entries_path = dir.join("entries.jsonl");
    std::fs::write(&entries_path, scenario::to_jsonl(&batch)).unwrap();
    let mut responses = String::new();
    for entry in &batch {
        let response = AgentResponse {
            entry_id: entry.id.clone(),
            text: format!("{} All set — is that okay?", entry.expected_response),
            latency_ms: 25.0,
            producer: Producer::External,
        };
        responses.push_str(&serde_json::to_string(&response).unwrap());
        responses.push('\n');
    }
    let responses_path = dir.join("responses.jsonl");
    std::fs::write(&responses_path, responses).unwrap();
    (entries_path, responses_path)
}

#[test]
fn gen_writes_batch_and_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "gen",
        "--total",
        "200",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let batch = std::fs::read_to_string(out.join("batch.jsonl")).unwrap();
    assert_eq!(batch.lines().count(), 200);
    assert!(out.join("batch.csv").exists());
    assert!(out.join("distribution.json").exists());
    assert!(out.join("resolved_config.txt").exists());
}

#[test]
fn gen_total_zero_gives_empty_file_and_zero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = run_ok(&["gen", "--total", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0);
    assert_eq!(
        std::fs::read_to_string(out.join("batch.jsonl")).unwrap(),
        ""
    );
}

#[test]
fn gen_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_ok(&[
        "gen",
        "--total",
        "150",
        "--seed",
        "11",
        "--out",
        out_a.to_str().unwrap(),
    ]);
    run_ok(&[
        "gen",
        "--total",
        "150",
        "--seed",
        "11",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(out_a.join("batch.jsonl")).unwrap(),
        std::fs::read(out_b.join("batch.jsonl")).unwrap()
    );
}

#[test]
fn gen_missing_template_bank_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .args([
            "gen",
            "--total",
            "10",
            "--template-bank",
            "/no/such/bank.json",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 3);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("\"error\""), "stderr: {stderr}");
}

#[test]
fn gen_bad_quota_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .args([
            "gen",
            "--total",
            "10",
            "--quota",
            "health=3,education=3",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn eval_with_good_mock_is_deterministic_and_clean() {
    let dir = tempfile::tempdir().unwrap();
    let (entries, responses) = write_eval_inputs(dir.path(), 20, 3);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run_ok(&[
            "eval",
            "--entries",
            entries.to_str().unwrap(),
            "--responses",
            responses.to_str().unwrap(),
            "--mock-judge",
            fixture("mock_verdicts_good.json").to_str().unwrap(),
            "--model-name",
            "mock-run",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&output), 0, "clean mock run should not degrade");
    }
    assert_eq!(
        std::fs::read(out_a.join("summary.csv")).unwrap(),
        std::fs::read(out_b.join("summary.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(out_a.join("reports.jsonl")).unwrap(),
        std::fs::read(out_b.join("reports.jsonl")).unwrap()
    );
    let summary = std::fs::read_to_string(out_a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("Model Name,"));
    assert!(summary.lines().nth(1).unwrap().starts_with("mock-run,"));
}

#[test]
fn eval_with_malformed_mock_degrades_to_fallback_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let (entries, responses) = write_eval_inputs(dir.path(), 10, 5);
    let out = dir.path().join("out");
    let output = bin()
        .args([
            "eval",
            "--entries",
            entries.to_str().unwrap(),
            "--responses",
            responses.to_str().unwrap(),
            "--mock-judge",
            fixture("mock_verdicts_malformed.json").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 4);
    let reports = std::fs::read_to_string(out.join("reports.jsonl")).unwrap();
    assert_eq!(reports.lines().count(), 10);
    for line in reports.lines() {
        let report: homeval::scoring::EvaluationReport = serde_json::from_str(line).unwrap();
        assert!(report.axis_set.all_fallback());
        assert_eq!(report.completion, 100.0);
    }
}

#[test]
fn eval_with_unreachable_endpoint_still_completes() {
    let dir = tempfile::tempdir().unwrap();
    let (entries, responses) = write_eval_inputs(dir.path(), 3, 9);
    let out = dir.path().join("out");
    let config_path = dir.path().join("run.conf");
    std::fs::write(&config_path, "endpoint.retries = 0\n").unwrap();
    let output = bin()
        .args([
            "eval",
            "--entries",
            entries.to_str().unwrap(),
            "--responses",
            responses.to_str().unwrap(),
            "--endpoint",
            "http://127.0.0.1:9",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 4);
    assert!(out.join("summary.csv").exists());
}

#[test]
fn eval_missing_response_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let (entries, _) = write_eval_inputs(dir.path(), 5, 2);
    let responses = dir.path().join("none.jsonl");
    std::fs::write(&responses, "").unwrap();
    let output = bin()
        .args([
            "eval",
            "--entries",
            entries.to_str().unwrap(),
            "--responses",
            responses.to_str().unwrap(),
            "--mock-judge",
            fixture("mock_verdicts_good.json").to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 3);
}

#[test]
fn simulate_single_on_midnight_trace_has_zero_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "simulate",
        "--trace",
        "midnight-conflict",
        "--arch",
        "single",
        "--out",
        out.to_str().unwrap(),
    ]);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics_single.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["violations"], 0);
    assert_eq!(metrics["decisions"], 4);
    assert!(out.join("log_single.jsonl").exists());
    assert!(out.join("episodic_single.csv").exists());
}

#[test]
fn simulate_baseline_logs_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "simulate",
        "--trace",
        "midnight-conflict",
        "--arch",
        "baseline",
        "--out",
        out.to_str().unwrap(),
    ]);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics_baseline.json")).unwrap())
            .unwrap();
    assert!(metrics["conflicts"].as_u64().unwrap() >= 1);
}

#[test]
fn simulate_compare_emits_two_column_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "simulate",
        "--trace",
        "conflict-suite",
        "--arch",
        "compare",
        "--out",
        out.to_str().unwrap(),
    ]);
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(table.starts_with("metric,single_agent,multi_agent_baseline"));
    assert!(table.contains("disparate_impact,"));
    assert!(table.contains("latency_p50_ms,"));
    assert!(out.join("parent_report_child1_2025-03-01.json").exists());
}

#[test]
fn simulate_malformed_trace_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    std::fs::write(&trace, "{\"not\": \"an event\"}\n").unwrap();
    let output = bin()
        .args([
            "simulate",
            "--trace",
            trace.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 3);
}

#[test]
fn report_renders_axis_means_fixture_row_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "report",
        "--axis-means",
        fixture("agora4b_axis_means.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    assert!(
        row.starts_with("Agora-4B,96.40,94.40,88.67,81.75,92.45,"),
        "row: {row}"
    );
}

#[test]
fn stats_paired_t_and_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    std::fs::write(&a, "1.1\n2.0\n2.9\n").unwrap();
    std::fs::write(&b, "1.0\n2.2\n3.1\n").unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "stats",
        "--method",
        "paired-t",
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert!((result["statistic"].as_f64().unwrap() + 1.0).abs() < 1e-9);

    // Degenerate sample: identical columns.
    let output = bin()
        .args([
            "stats",
            "--method",
            "paired-t",
            "--a",
            a.to_str().unwrap(),
            "--b",
            a.to_str().unwrap(),
            "--out",
            dir.path().join("out2").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 3);

    // Unknown method is a config error.
    let output = bin()
        .args([
            "stats",
            "--method",
            "anova",
            "--a",
            a.to_str().unwrap(),
            "--b",
            b.to_str().unwrap(),
            "--out",
            dir.path().join("out3").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "mystery = 1\n").unwrap();
    let output = bin()
        .args([
            "gen",
            "--total",
            "5",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn seed_env_var_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let output = bin()
        .args(["gen", "--total", "50", "--out", out_a.to_str().unwrap()])
        .env("HOMEVAL_SEED", "101")
        .output()
        .unwrap();
    assert!(output.status.success());
    let output = bin()
        .args(["gen", "--total", "50", "--out", out_b.to_str().unwrap()])
        .env("HOMEVAL_SEED", "202")
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_ne!(
        std::fs::read(out_a.join("batch.jsonl")).unwrap(),
        std::fs::read(out_b.join("batch.jsonl")).unwrap()
    );
    let resolved = std::fs::read_to_string(out_a.join("resolved_config.txt")).unwrap();
    assert!(resolved.contains("seed = 101"));
}
