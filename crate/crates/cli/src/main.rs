use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sqlmend::classify::classify;
use sqlmend::eval::triage;
use sqlmend::harness::{run_files, to_jsonl};
use sqlmend::pipeline::repair;
use sqlmend::synth::Budget;
use sqlmend::table::load_problem;

#[derive(Parser)]
#[command(
    name = "sqlmend",
    version,
    about = "Triage, classify and repair SQL queries against example tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a JSONL corpus and print an aggregate report.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        problems: PathBuf,
        /// Overall repair budget per query, in milliseconds.
        #[arg(long)]
        budget_ms: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-query results as JSON Lines.
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
    /// Grade and classify one query.
    Triage {
        #[arg(long)]
        problem: PathBuf,
        query: String,
    },
    /// Repair one query.
    Repair {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        budget_ms: Option<u64>,
        query: String,
    },
}

fn budget(ms: Option<u64>) -> Budget {
    ms.map_or_else(Budget::default, |ms| {
        Budget::with_overall(Duration::from_millis(ms))
    })
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            corpus,
            problems,
            budget_ms,
            out,
            jsonl,
        } => {
            let (report, outcomes) = run_files(&corpus, &problems, budget(budget_ms))?;
            let report = serde_json::to_string_pretty(&report)? + "\n";
            match out {
                Some(path) => std::fs::write(&path, report)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{report}"),
            }
            if let Some(path) = jsonl {
                std::fs::write(&path, to_jsonl(&outcomes))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Triage { problem, query } => {
            let problem = load_problem(problem)?;
            let t = triage(&query, &problem);
            let report = classify(&query, &t, &problem);
            let json = serde_json::json!({
                "verdict": t.verdict,
                "firstFailingPair": t.first_failing_pair,
                "detail": t.detail,
                "categories": report.categories,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::Repair {
            problem,
            budget_ms,
            query,
        } => {
            let problem = load_problem(problem)?;
            let result = repair(&query, &problem, budget(budget_ms));
            let json = serde_json::json!({
                "status": result.status,
                "reason": result.reason,
                "tags": result.operations,
                "repaired": result.repaired_text(),
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
