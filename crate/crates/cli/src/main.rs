//! `homeval`: generate synthetic household scenario batches, evaluate
//! agent responses on the eight-axis rubric with judge+fallback scoring,
//! run the arbitration simulator against its multi-agent baseline, render
//! summary tables, and run the comparison statistics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use homeval_cli::commands::{
    cmd_eval, cmd_gen, cmd_report, cmd_simulate, cmd_stats, EvalArgs, GenArgs, ReportArgs, SimArch,
    SimulateArgs, StatsArgs,
};
use homeval_cli::config::RunConfig;
use homeval_cli::CliError;

#[derive(Parser)]
#[command(
    name = "homeval",
    version,
    about = "Household agent evaluation harness"
)]
struct Cli {
    /// Key=value config file (see README for the key list).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to runs/<command>-<seed>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed override (also via HOMEVAL_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario batch.
    Gen {
        #[arg(long)]
        total: usize,
        /// Target fraction of entries in concurrent groups.
        #[arg(long)]
        concurrent_fraction: Option<f64>,
        /// Explicit quota, e.g. "health=7,education=3" (default balanced).
        #[arg(long)]
        quota: Option<String>,
        /// Template bank JSON (default: built-in bank).
        #[arg(long)]
        template_bank: Option<PathBuf>,
    },
    /// Evaluate responses against entries on the eight axes.
    Eval {
        #[arg(long)]
        entries: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        /// Canned verdict fixture keyed by entry id; replaces the HTTP judge.
        #[arg(long)]
        mock_judge: Option<PathBuf>,
        /// Judge endpoint base URL (also via HOMEVAL_ENDPOINT).
        #[arg(long)]
        endpoint: Option<String>,
        /// Label for the summary row.
        #[arg(long, default_value = "run")]
        model_name: String,
        /// Judge calls per response.
        #[arg(long)]
        n_runs: Option<u32>,
    },
    /// Run the arbitration simulator on a trace.
    Simulate {
        /// Named fixture (midnight-conflict, conflict-suite) or a JSONL path.
        #[arg(long)]
        trace: String,
        /// single, baseline, or compare.
        #[arg(long, default_value = "single")]
        arch: String,
        /// Household state JSON (default: built-in household).
        #[arg(long)]
        household: Option<PathBuf>,
    },
    /// Render a summary CSV from axis means or prior reports.
    Report {
        #[arg(long)]
        axis_means: Option<PathBuf>,
        #[arg(long)]
        from_reports: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        model_name: String,
    },
    /// Run paired-t, Wilcoxon, or kappa over two column files.
    Stats {
        #[arg(long)]
        method: String,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config.apply_env()?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let command_name = match &cli.command {
        Command::Gen { .. } => "gen",
        Command::Eval { .. } => "eval",
        Command::Simulate { .. } => "simulate",
        Command::Report { .. } => "report",
        Command::Stats { .. } => "stats",
    };
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{command_name}-{}", config.seed)));

    let outcome = match cli.command {
        Command::Gen {
            total,
            concurrent_fraction,
            quota,
            template_bank,
        } => {
            let args = GenArgs {
                total,
                concurrent_fraction: concurrent_fraction.unwrap_or(config.concurrent_fraction),
                quota,
                template_bank,
                seed: config.seed,
            };
            cmd_gen(&args, &config, &out_dir)?
        }
        Command::Eval {
            entries,
            responses,
            mock_judge,
            endpoint,
            model_name,
            n_runs,
        } => {
            if let Some(url) = endpoint {
                config.endpoint.base_url = url;
            }
            let args = EvalArgs {
                entries,
                responses,
                mock_judge,
                model_name,
                n_runs: n_runs.unwrap_or(config.n_runs).max(1),
            };
            cmd_eval(&args, &config, &out_dir)?
        }
        Command::Simulate {
            trace,
            arch,
            household,
        } => {
            let arch = match arch.as_str() {
                "single" => SimArch::Single,
                "baseline" => SimArch::Baseline,
                "compare" => SimArch::Compare,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown arch {other:?} (expected single, baseline, or compare)"
                    )))
                }
            };
            let args = SimulateArgs {
                trace,
                arch,
                household,
                seed: config.seed,
            };
            cmd_simulate(&args, &config, &out_dir)?
        }
        Command::Report {
            axis_means,
            from_reports,
            model_name,
        } => {
            let args = ReportArgs {
                axis_means,
                from_reports,
                model_name,
            };
            cmd_report(&args, &config, &out_dir)?
        }
        Command::Stats { method, a, b } => {
            let args = StatsArgs { method, a, b };
            cmd_stats(&args, &config, &out_dir)?
        }
    };

    for message in &outcome.messages {
        println!("{message}");
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
