//! Implementations behind the `gen`, `eval`, `simulate`, `report`, and
//! `stats` subcommands. Every command writes its resolved config next to
//! its outputs so a run can be reproduced from that file plus fixtures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use homeval::detectors::DetectionConfig;
use homeval::domain::{AgentResponse, Axis, Category, ScenarioEntry};
use homeval::heuristics::HeuristicConfig;
use homeval::judge::{HttpJudgeClient, JudgeClient, MockJudgeClient};
use homeval::metrics::{
    cohen_kappa, cohort_outcomes, disparate_impact, paired_ttest, rates, wilcoxon_signed,
    StatResult,
};
use homeval::scenario::{
    self, default_conflict_pairs, generate_batch, validate_distribution, CategoryQuota,
    GenerationConfig, TemplateBank,
};
use homeval::scoring::{summary_csv, Evaluator, EvaluatorConfig, SummaryRow};
use homeval::simulator::fixtures::{
    default_assignment, default_autonomy, default_household, named_trace,
};
use homeval::simulator::{
    parent_report, run_multi_agent_baseline, run_trace, HouseholdState, PolicyConfig, QueryEvent,
    SimulationLog,
};

use crate::config::RunConfig;
use crate::persist::EpisodicLogWriter;
use crate::{CliError, EXIT_DEGRADED, EXIT_OK};

/// What a command produced: its exit code and human-readable notes.
#[derive(Debug, Default)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub messages: Vec<String>,
}

fn ensure_out_dir(out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out_dir.display())))
}

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_resolved_config(out_dir: &Path, config: &RunConfig) -> Result<(), CliError> {
    write_file(out_dir, "resolved_config.txt", &config.resolved_text())?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

pub struct GenArgs {
    pub total: usize,
    pub concurrent_fraction: f64,
    pub quota: Option<String>,
    pub template_bank: Option<PathBuf>,
    pub seed: u64,
}

fn parse_quota(spec: &str) -> Result<BTreeMap<Category, usize>, CliError> {
    let mut quota = BTreeMap::new();
    for part in spec.split(',') {
        let (name, count) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("quota part {part:?} is not name=count")))?;
        let category = Category::ALL
            .into_iter()
            .find(|c| c.label() == name.trim())
            .ok_or_else(|| CliError::Config(format!("unknown category {name:?}")))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad quota count {count:?}")))?;
        quota.insert(category, count);
    }
    Ok(quota)
}

/// Generates a batch, writes it as JSON-lines and CSV, and writes the
/// distribution report. Exit 0 requires quota satisfaction.
pub fn cmd_gen(
    args: &GenArgs,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<CommandOutcome, CliError> {
    ensure_out_dir(out_dir)?;
    let bank = match &args.template_bank {
        Some(path) => TemplateBank::from_json(&read_to_string(path)?)
            .map_err(|e| CliError::Input(format!("template bank: {e}")))?,
        None => TemplateBank::builtin(),
    };
    let generation = GenerationConfig {
        total: args.total,
        concurrent_fraction: args.concurrent_fraction,
        category_quota: match &args.quota {
            Some(spec) => CategoryQuota::Explicit(parse_quota(spec)?),
            None => CategoryQuota::Balanced,
        },
        seed: args.seed,
        conflict_pairs: default_conflict_pairs(),
        language: "en-US".to_string(),
    };
    let batch = generate_batch(&generation, &bank).map_err(|e| match e {
        scenario::ScenarioError::InfeasibleQuota { .. } | scenario::ScenarioError::BadConfig(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    })?;
    let report = validate_distribution(&batch, &generation);

    write_file(out_dir, "batch.jsonl", &scenario::to_jsonl(&batch))?;
    write_file(out_dir, "batch.csv", &scenario::to_csv(&batch))?;
    write_file(
        out_dir,
        "distribution.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_resolved_config(out_dir, config)?;

    let quota_ok = report.quota_deviations.is_empty()
        && (batch.is_empty() || report.concurrent_within_tolerance);
    Ok(CommandOutcome {
        exit_code: if quota_ok { EXIT_OK } else { 1 },
        messages: vec![format!(
            "generated {} entries, concurrent fraction {:.3}",
            report.total, report.concurrent_fraction
        )],
    })
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub struct EvalArgs {
    pub entries: PathBuf,
    pub responses: PathBuf,
    pub mock_judge: Option<PathBuf>,
    pub model_name: String,
    pub n_runs: u32,
}

fn load_entries(path: &Path) -> Result<Vec<ScenarioEntry>, CliError> {
    scenario::from_jsonl(&read_to_string(path)?)
        .map_err(|e| CliError::Input(format!("entries {}: {e}", path.display())))
}

fn load_responses(path: &Path) -> Result<Vec<AgentResponse>, CliError> {
    read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str::<AgentResponse>(line)
                .map_err(|e| CliError::Input(format!("responses {}: {e}", path.display())))
        })
        .collect()
}

/// Evaluates responses against entries, writing per-entry reports
/// (JSON-lines) and the summary CSV. Exit 4 when any axis fell back to the
/// heuristics; outputs are still written.
pub fn cmd_eval(
    args: &EvalArgs,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<CommandOutcome, CliError> {
    ensure_out_dir(out_dir)?;
    let entries = load_entries(&args.entries)?;
    let responses = load_responses(&args.responses)?;
    let by_id: BTreeMap<&str, &AgentResponse> =
        responses.iter().map(|r| (r.entry_id.as_str(), r)).collect();
    let mut missing = Vec::new();
    let mut pairs: Vec<(&ScenarioEntry, &AgentResponse)> = Vec::new();
    for entry in &entries {
        match by_id.get(entry.id.as_str()) {
            Some(response) => pairs.push((entry, response)),
            None => missing.push(entry.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Input(format!(
            "{} entries lack responses (first: {})",
            missing.len(),
            missing[0]
        )));
    }

    let mock_client;
    let http_client;
    let client: &dyn JudgeClient = match &args.mock_judge {
        Some(path) => {
            mock_client = MockJudgeClient::from_json(&read_to_string(path)?)
                .map_err(|e| CliError::Input(format!("mock verdicts {}: {e}", path.display())))?;
            &mock_client
        }
        None => {
            http_client = HttpJudgeClient::new(&config.endpoint)
                .map_err(|e| CliError::Config(format!("endpoint: {e}")))?;
            &http_client
        }
    };

    let detection = DetectionConfig::builtin();
    let heuristics = HeuristicConfig::builtin();
    let evaluator_config = EvaluatorConfig {
        weights: config.weights.clone(),
        endpoint: config.endpoint.clone(),
        n_runs: args.n_runs,
        enabled_axes: Axis::ALL.to_vec(),
    };
    let evaluator = Evaluator {
        detection: &detection,
        heuristics: &heuristics,
        config: &evaluator_config,
        client,
    };
    let reports = evaluator.evaluate_batch(&pairs);

    let mut jsonl = String::new();
    for report in &reports {
        jsonl.push_str(&serde_json::to_string(report).expect("reports serialize"));
        jsonl.push('\n');
    }
    write_file(out_dir, "reports.jsonl", &jsonl)?;

    let row = SummaryRow::from_reports(args.model_name.clone(), &reports)
        .map_err(|e| CliError::Input(format!("summary: {e}")))?;
    write_file(out_dir, "summary.csv", &summary_csv(&[row]))?;
    write_resolved_config(out_dir, config)?;

    let fallback_axes: usize = reports.iter().map(|r| r.axis_set.fallback_count()).sum();
    let mut outcome = CommandOutcome {
        exit_code: EXIT_OK,
        messages: vec![format!("evaluated {} responses", reports.len())],
    };
    if fallback_axes > 0 {
        outcome.exit_code = EXIT_DEGRADED;
        outcome.messages.push(format!(
            "warning: {fallback_axes} axis scores fell back to heuristics"
        ));
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimulateArgs {
    pub trace: String,
    pub arch: SimArch,
    pub household: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimArch {
    Single,
    Baseline,
    Compare,
}

fn load_trace(spec: &str) -> Result<Vec<QueryEvent>, CliError> {
    if let Some(trace) = named_trace(spec) {
        return Ok(trace);
    }
    let path = Path::new(spec);
    read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str::<QueryEvent>(line)
                .map_err(|e| CliError::Input(format!("trace {}: {e}", path.display())))
        })
        .collect()
}

fn load_household(path: &Option<PathBuf>) -> Result<HouseholdState, CliError> {
    match path {
        Some(path) => serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| CliError::Input(format!("household {}: {e}", path.display()))),
        None => Ok(default_household()),
    }
}

fn metrics_json(log: &SimulationLog, heuristics: &HeuristicConfig) -> serde_json::Value {
    let summary = rates(log, heuristics).ok();
    let dir = disparate_impact(&cohort_outcomes(log, heuristics)).ok();
    serde_json::json!({
        "rates": summary,
        "disparate_impact": dir,
        "conflicts": log.conflict_count(),
        "violations": log.violation_count(),
        "decisions": log.decision_count(),
    })
}

fn write_simulation(
    out_dir: &Path,
    label: &str,
    log: &SimulationLog,
    heuristics: &HeuristicConfig,
) -> Result<(), CliError> {
    write_file(out_dir, &format!("log_{label}.jsonl"), &log.to_jsonl())?;
    write_file(
        out_dir,
        &format!("metrics_{label}.json"),
        &serde_json::to_string_pretty(&metrics_json(log, heuristics)).unwrap(),
    )?;

    // Episodic CSV, with the 21:00 parent report merged in timestamp order.
    let mut records = log.episodic.clone();
    for occupant in &log.initial_state.occupants {
        if occupant.profile.consent.parental_reporting != Some(true) {
            continue;
        }
        let child_id = &occupant.profile.user_id;
        let mut days: Vec<chrono::NaiveDate> =
            log.windows.iter().map(|w| w.timestamp.date()).collect();
        days.dedup();
        for day in days {
            if let Ok(report) = parent_report(log, child_id, day) {
                write_file(
                    out_dir,
                    &format!("parent_report_{child_id}_{day}.json"),
                    &serde_json::to_string_pretty(&report).unwrap(),
                )?;
                records.push(homeval::domain::EpisodicRecord {
                    timestamp: report.generated_at,
                    user_id: child_id.clone(),
                    event_type: homeval::domain::EventType::Report,
                    payload_summary: format!(
                        "daily report: {} queries, {} flags",
                        report.query_count,
                        report.flagged.len()
                    ),
                    latency_ms: None,
                    flags: report.flagged.clone(),
                });
            }
        }
    }
    records.sort_by_key(|r| r.timestamp);
    let log_path = out_dir.join(format!("episodic_{label}.csv"));
    if log_path.exists() {
        std::fs::remove_file(&log_path)
            .map_err(|e| CliError::Input(format!("cannot rewrite {}: {e}", log_path.display())))?;
    }
    let mut writer = EpisodicLogWriter::open(&log_path)
        .map_err(|e| CliError::Input(format!("episodic log: {e}")))?;
    for record in &records {
        writer
            .append(record)
            .map_err(|e| CliError::Input(format!("episodic log: {e}")))?;
    }
    Ok(())
}

/// Runs the single-agent policy and/or the multi-agent baseline over a
/// trace, writing logs, metrics, episodic CSVs, parent reports, and (for
/// compare) the two-column comparison table.
pub fn cmd_simulate(
    args: &SimulateArgs,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<CommandOutcome, CliError> {
    ensure_out_dir(out_dir)?;
    let trace = load_trace(&args.trace)?;
    let household = load_household(&args.household)?;
    let policy = PolicyConfig::default();
    let heuristics = HeuristicConfig::builtin();
    let mut messages = Vec::new();

    let single = if args.arch != SimArch::Baseline {
        let log = run_trace(&trace, &household, &policy, &default_autonomy(), args.seed)
            .map_err(|e| CliError::Input(e.to_string()))?;
        write_simulation(out_dir, "single", &log, &heuristics)?;
        messages.push(format!(
            "single-agent: {} decisions, {} violations",
            log.decision_count(),
            log.violation_count()
        ));
        Some(log)
    } else {
        None
    };
    let baseline = if args.arch != SimArch::Single {
        let log = run_multi_agent_baseline(
            &trace,
            &household,
            &policy,
            &default_assignment(),
            args.seed,
        )
        .map_err(|e| CliError::Input(e.to_string()))?;
        write_simulation(out_dir, "baseline", &log, &heuristics)?;
        messages.push(format!(
            "baseline: {} decisions, {} conflicts, {} violations",
            log.decision_count(),
            log.conflict_count(),
            log.violation_count()
        ));
        Some(log)
    } else {
        None
    };

    if let (Some(single), Some(baseline)) = (&single, &baseline) {
        let s = rates(single, &heuristics).map_err(|e| CliError::Input(e.to_string()))?;
        let b = rates(baseline, &heuristics).map_err(|e| CliError::Input(e.to_string()))?;
        let s_dir = disparate_impact(&cohort_outcomes(single, &heuristics))
            .map_err(|e| CliError::Input(e.to_string()))?;
        let b_dir = disparate_impact(&cohort_outcomes(baseline, &heuristics))
            .map_err(|e| CliError::Input(e.to_string()))?;
        let mut table = String::from("metric,single_agent,multi_agent_baseline\n");
        table.push_str(&format!(
            "compliance,{:.4},{:.4}\n",
            s.compliance, b.compliance
        ));
        table.push_str(&format!(
            "safety_violation_rate,{:.4},{:.4}\n",
            s.safety_violation_rate, b.safety_violation_rate
        ));
        table.push_str(&format!("disparate_impact,{s_dir:.4},{b_dir:.4}\n"));
        table.push_str(&format!(
            "latency_p50_ms,{:.4},{:.4}\n",
            s.latency_p50_ms, b.latency_p50_ms
        ));
        table.push_str(&format!(
            "latency_p95_ms,{:.4},{:.4}\n",
            s.latency_p95_ms, b.latency_p95_ms
        ));
        table.push_str(&format!(
            "coordination_conflicts,{},{}\n",
            single.conflict_count(),
            baseline.conflict_count()
        ));
        table.push_str(&format!(
            "violations,{},{}\n",
            single.violation_count(),
            baseline.violation_count()
        ));
        write_file(out_dir, "comparison.csv", &table)?;
    }

    write_resolved_config(out_dir, config)?;
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        messages,
    })
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub struct ReportArgs {
    pub axis_means: Option<PathBuf>,
    pub from_reports: Option<PathBuf>,
    pub model_name: String,
}

#[derive(serde::Deserialize)]
struct AxisMeansFixture {
    model: String,
    axis_means: BTreeMap<Axis, f64>,
}

/// Renders the summary CSV, either from an axis-means fixture file or from
/// a previous eval's reports.jsonl.
pub fn cmd_report(
    args: &ReportArgs,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<CommandOutcome, CliError> {
    ensure_out_dir(out_dir)?;
    let weights = &config.weights;
    let rows: Vec<SummaryRow> = match (&args.axis_means, &args.from_reports) {
        (Some(path), _) => {
            let text = read_to_string(path)?;
            let fixtures: Vec<AxisMeansFixture> = if text.trim_start().starts_with('[') {
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Input(format!("axis means {}: {e}", path.display())))?
            } else {
                vec![serde_json::from_str(&text)
                    .map_err(|e| CliError::Input(format!("axis means {}: {e}", path.display())))?]
            };
            fixtures
                .into_iter()
                .map(|f| {
                    SummaryRow::from_axis_means(f.model, f.axis_means, weights)
                        .map_err(|e| CliError::Input(format!("axis means: {e}")))
                })
                .collect::<Result<_, _>>()?
        }
        (None, Some(path)) => {
            let reports = read_to_string(path)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<Vec<homeval::scoring::EvaluationReport>, _>>()
                .map_err(|e| CliError::Input(format!("reports {}: {e}", path.display())))?;
            vec![SummaryRow::from_reports(args.model_name.clone(), &reports)
                .map_err(|e| CliError::Input(format!("reports: {e}")))?]
        }
        (None, None) => {
            return Err(CliError::Config(
                "report needs --axis-means or --from-reports".to_string(),
            ))
        }
    };
    write_file(out_dir, "summary.csv", &summary_csv(&rows))?;
    write_resolved_config(out_dir, config)?;
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        messages: vec![format!("rendered {} summary row(s)", rows.len())],
    })
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

pub struct StatsArgs {
    pub method: String,
    pub a: PathBuf,
    pub b: PathBuf,
}

fn load_numbers(path: &Path) -> Result<Vec<f64>, CliError> {
    read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Input(format!("{}: {e} in {l:?}", path.display())))
        })
        .collect()
}

fn load_labels(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect())
}

/// Runs one statistical test over two column files and writes the result
/// JSON (also echoed in the outcome messages).
pub fn cmd_stats(
    args: &StatsArgs,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<CommandOutcome, CliError> {
    ensure_out_dir(out_dir)?;
    let result: StatResult = match args.method.as_str() {
        "paired-t" => paired_ttest(&load_numbers(&args.a)?, &load_numbers(&args.b)?)
            .map_err(|e| CliError::Input(e.to_string()))?,
        "wilcoxon" => wilcoxon_signed(&load_numbers(&args.a)?, &load_numbers(&args.b)?)
            .map_err(|e| CliError::Input(e.to_string()))?,
        "kappa" => {
            let result = cohen_kappa(&load_labels(&args.a)?, &load_labels(&args.b)?)
                .map_err(|e| CliError::Input(e.to_string()))?;
            if result.statistic < 0.7 {
                eprintln!(
                    "note: kappa {:.4} is below the 0.7 agreement bar",
                    result.statistic
                );
            }
            result
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown method {other:?} (expected paired-t, wilcoxon, or kappa)"
            )))
        }
    };
    let json = serde_json::to_string_pretty(&result).expect("results serialize");
    write_file(out_dir, "stats.json", &json)?;
    write_resolved_config(out_dir, config)?;
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        messages: vec![json],
    })
}
