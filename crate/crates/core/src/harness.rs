//! Batch triage, classification and repair over a corpus of submissions.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classify::{classify, Category};
use crate::eval::{triage, Verdict};
use crate::pipeline::{repair, FailureReason, RepairStatus, RepairTag};
use crate::synth::Budget;
use crate::table::{load_problem_dir, ProblemError, ProblemSpec};

/// One submission: `{"problem": id, "query": text, "participant"?, "ts"?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub problem: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<serde_json::Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corpus line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("corpus line {line}: unknown problem `{id}`")]
    UnknownProblem { line: usize, id: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Reads a JSON Lines corpus. Blank lines are skipped.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>, HarnessError> {
    let path = path.as_ref();
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| HarnessError::Record {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RepairOutcome {
    pub status: RepairStatus,
    pub reason: Option<FailureReason>,
    pub tags: Vec<RepairTag>,
    pub repaired: Option<String>,
    pub elapsed_ms: f64,
}

/// Per-record result; serialized as one JSONL line.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordOutcome {
    pub index: usize,
    pub problem: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    pub query: String,
    pub verdict: Verdict,
    pub categories: Vec<Category>,
    pub repair: Option<RepairOutcome>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Totals {
    pub correct: usize,
    pub syntax_error: usize,
    pub semantic_error: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub count: usize,
    pub median_ms: f64,
    pub max_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub totals: Totals,
    pub per_category: BTreeMap<Category, usize>,
    pub per_repair_type: BTreeMap<RepairTag, usize>,
    pub repaired: usize,
    /// `repaired / (syntaxError + semanticError)`; `None` when nothing was incorrect.
    pub repair_rate: Option<f64>,
    /// Repair-call timing keyed by outcome (`repaired`, `unrepairable`).
    pub timing: BTreeMap<String, Timing>,
}

impl RunReport {
    fn from_outcomes(outcomes: &[RecordOutcome]) -> RunReport {
        let mut totals = Totals::default();
        let mut per_category = BTreeMap::new();
        let mut per_repair_type = BTreeMap::new();
        let mut repaired = 0;
        let mut times: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for o in outcomes {
            match o.verdict {
                Verdict::Correct => totals.correct += 1,
                Verdict::SyntaxError => totals.syntax_error += 1,
                Verdict::SemanticError => totals.semantic_error += 1,
            }
            for c in &o.categories {
                *per_category.entry(*c).or_insert(0) += 1;
            }
            if let Some(r) = &o.repair {
                let key = match r.status {
                    RepairStatus::Repaired => {
                        repaired += 1;
                        for t in &r.tags {
                            *per_repair_type.entry(*t).or_insert(0) += 1;
                        }
                        "repaired"
                    }
                    RepairStatus::Unrepairable => "unrepairable",
                };
                times.entry(key.to_string()).or_default().push(r.elapsed_ms);
            }
        }
        let incorrect = totals.syntax_error + totals.semantic_error;
        let repair_rate = (incorrect > 0).then(|| repaired as f64 / incorrect as f64);
        let timing = times.into_iter().map(|(k, v)| (k, summarize(v))).collect();
        RunReport {
            totals,
            per_category,
            per_repair_type,
            repaired,
            repair_rate,
            timing,
        }
    }
}

fn summarize(mut ms: Vec<f64>) -> Timing {
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    let median = if n % 2 == 1 {
        ms[n / 2]
    } else {
        (ms[n / 2 - 1] + ms[n / 2]) / 2.0
    };
    Timing {
        count: n,
        median_ms: median,
        max_ms: ms[n - 1],
    }
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Triages, classifies and (if incorrect) repairs every record.
///
/// Every record must name a loaded problem; an unknown id is an input error
/// reported before any work is done.
pub fn run(
    records: &[CorpusRecord],
    problems: &[ProblemSpec],
    budget: Budget,
) -> Result<(RunReport, Vec<RecordOutcome>), HarnessError> {
    let by_id: HashMap<&str, &ProblemSpec> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let resolved = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            by_id
                .get(r.problem.as_str())
                .copied()
                .ok_or_else(|| HarnessError::UnknownProblem {
                    line: i + 1,
                    id: r.problem.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let outcomes: Vec<RecordOutcome> = records
        .iter()
        .zip(resolved)
        .enumerate()
        .map(|(index, (record, problem))| process(index, record, problem, budget))
        .collect();
    Ok((RunReport::from_outcomes(&outcomes), outcomes))
}

/// Loads the corpus and problem directory, then calls [`run`].
pub fn run_files(
    corpus: impl AsRef<Path>,
    problems: impl AsRef<Path>,
    budget: Budget,
) -> Result<(RunReport, Vec<RecordOutcome>), HarnessError> {
    let records = read_corpus(corpus)?;
    let problems = load_problem_dir(problems)?;
    run(&records, &problems, budget)
}

fn process(
    index: usize,
    record: &CorpusRecord,
    problem: &ProblemSpec,
    budget: Budget,
) -> RecordOutcome {
    let t = triage(&record.query, problem);
    let categories = classify(&record.query, &t, problem)
        .categories
        .into_iter()
        .collect();
    let repair = (!t.is_correct()).then(|| {
        let result = repair(&record.query, problem, budget);
        RepairOutcome {
            status: result.status,
            reason: result.reason,
            repaired: result.repaired_text(),
            tags: result.operations,
            elapsed_ms: millis(result.elapsed),
        }
    });
    RecordOutcome {
        index,
        problem: record.problem.clone(),
        participant: record.participant.clone(),
        query: record.query.clone(),
        verdict: t.verdict,
        categories,
        repair,
    }
}

/// Renders outcomes as JSON Lines, one per record, in input order.
pub fn to_jsonl(outcomes: &[RecordOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        out.push_str(&serde_json::to_string(o).expect("outcome serializes"));
        out.push('\n');
    }
    out
}
