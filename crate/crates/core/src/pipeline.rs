//! Staged repair: rule-based rewrites first, then synthesis stages in a
//! fixed order, stopping at the first stage that produces a passing query.

use std::fmt;
use std::time::Duration;

use serde::Serialize;

use crate::eval::{parse_for, Triage, Verdict};
use crate::query::Query;
use crate::rewrite::{fix_columns, fix_operators, fix_strings, RewriteKind, RewriteLog};
use crate::synth::{
    check, remove_clauses, synth_clauses, synth_columns, synth_constants, synth_operators, Budget,
    SynthError,
};
use crate::table::ProblemSpec;

/// Kinds of repair, rule-based ones first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RepairTag {
    ColumnMismatch,
    StringRepair,
    OperatorMismatch,
    ColumnSynthesis,
    ClauseRemoval,
    ClauseSynthesis,
    ConstantSynthesis,
    OperatorSynthesis,
}

impl RepairTag {
    pub const ALL: [RepairTag; 8] = [
        RepairTag::ColumnMismatch,
        RepairTag::StringRepair,
        RepairTag::OperatorMismatch,
        RepairTag::ColumnSynthesis,
        RepairTag::ClauseRemoval,
        RepairTag::ClauseSynthesis,
        RepairTag::ConstantSynthesis,
        RepairTag::OperatorSynthesis,
    ];

    pub fn is_synthesis(self) -> bool {
        !matches!(
            self,
            RepairTag::ColumnMismatch | RepairTag::StringRepair | RepairTag::OperatorMismatch
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            RepairTag::ColumnMismatch => "Column Mismatch",
            RepairTag::StringRepair => "String Repair",
            RepairTag::OperatorMismatch => "Operator Mismatch",
            RepairTag::ColumnSynthesis => "Column Synthesis",
            RepairTag::ClauseRemoval => "Clause Removal",
            RepairTag::ClauseSynthesis => "Clause Synthesis",
            RepairTag::ConstantSynthesis => "Constant Synthesis",
            RepairTag::OperatorSynthesis => "Operator Synthesis",
        }
    }
}

impl fmt::Display for RepairTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<RewriteKind> for RepairTag {
    fn from(kind: RewriteKind) -> Self {
        match kind {
            RewriteKind::OperatorMismatch => RepairTag::OperatorMismatch,
            RewriteKind::ColumnMismatch => RepairTag::ColumnMismatch,
            RewriteKind::StringRepair => RepairTag::StringRepair,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum RepairStatus {
    Repaired,
    Unrepairable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FailureReason {
    /// The text is outside the lenient grammar.
    ParseFailure,
    /// The query already passes; nothing to repair.
    AlreadyCorrect,
    /// An unquoted word could not be classified as string or column.
    UnresolvedString,
    /// Every stage finished without a passing query.
    Exhausted,
    /// The overall budget ran out.
    BudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairResult {
    pub status: RepairStatus,
    pub reason: Option<FailureReason>,
    pub original: String,
    pub repaired: Option<Query>,
    /// Repairs applied, in pipeline order.
    pub operations: Vec<RepairTag>,
    /// Rule-based rewrites, with the text they replaced.
    pub rewrites: RewriteLog,
    pub elapsed: Duration,
}

impl RepairResult {
    pub fn is_repaired(&self) -> bool {
        self.status == RepairStatus::Repaired
    }

    /// The repaired query as SQL text.
    pub fn repaired_text(&self) -> Option<String> {
        self.repaired.as_ref().map(Query::to_string)
    }

    fn unrepairable(original: &str, reason: FailureReason, elapsed: Duration) -> Self {
        RepairResult {
            status: RepairStatus::Unrepairable,
            reason: Some(reason),
            original: original.to_string(),
            repaired: None,
            operations: Vec::new(),
            rewrites: RewriteLog::default(),
            elapsed,
        }
    }
}

/// Repairs `text` so that it passes every pair of `problem`.
///
/// ```
/// use sqlmend::pipeline::{repair, RepairTag};
/// use sqlmend::synth::Budget;
/// use sqlmend::table::ProblemSpec;
///
/// let problem = ProblemSpec::from_json(r#"{
///   "id": "shop",
///   "pairs": [{
///     "source": {"name": "items",
///                "columns": [{"name": "n", "type": "str"}, {"name": "p", "type": "int"}],
///                "rows": [["a", 1], ["b", 5], ["c", 9]]},
///     "destination": {"name": "items",
///                     "columns": [{"name": "n", "type": "str"}],
///                     "rows": [["b"], ["c"]]}
///   }]
/// }"#).unwrap();
///
/// let result = repair("SELECT n FROM items WHERE p > 7", &problem, Budget::default());
/// assert_eq!(result.repaired_text().unwrap(), "SELECT n FROM items WHERE p > 1");
/// assert_eq!(result.operations, [RepairTag::ConstantSynthesis]);
/// ```
pub fn repair(text: &str, problem: &ProblemSpec, budget: Budget) -> RepairResult {
    let timer = budget.start();
    let Ok(parsed) = parse_for(text, problem) else {
        return RepairResult::unrepairable(text, FailureReason::ParseFailure, timer.elapsed());
    };

    let (q, mut log) = fix_operators(&parsed);
    let (q, columns) = fix_columns(&q, problem).unwrap_or_else(|_| (q, RewriteLog::default()));
    log.extend(columns);
    let Ok((q, strings)) = fix_strings(&q, problem.source_schema()) else {
        return RepairResult::unrepairable(text, FailureReason::UnresolvedString, timer.elapsed());
    };
    log.extend(strings);

    let mut operations: Vec<RepairTag> = Vec::new();
    for kind in [
        RewriteKind::OperatorMismatch,
        RewriteKind::ColumnMismatch,
        RewriteKind::StringRepair,
    ] {
        if log.contains(kind) {
            operations.push(kind.into());
        }
    }

    let done = |repaired: Query, operations: Vec<RepairTag>, log: RewriteLog| {
        debug_assert_eq!(check(&repaired, problem), Ok(true));
        RepairResult {
            status: RepairStatus::Repaired,
            reason: None,
            original: text.to_string(),
            repaired: Some(repaired),
            operations,
            rewrites: log,
            elapsed: timer.elapsed(),
        }
    };

    if check(&q, problem) == Ok(true) {
        if operations.is_empty() {
            return RepairResult::unrepairable(
                text,
                FailureReason::AlreadyCorrect,
                timer.elapsed(),
            );
        }
        return done(q, operations, log);
    }

    type Stage = fn(
        &Query,
        &ProblemSpec,
        &crate::synth::Timer,
    ) -> Result<(Query, Vec<RepairTag>), SynthError>;
    let stages: [Stage; 5] = [
        |q, p, t| synth_constants(q, p, t).map(|r| (r, vec![RepairTag::ConstantSynthesis])),
        |q, p, t| synth_operators(q, p, t).map(|r| (r, vec![RepairTag::OperatorSynthesis])),
        |q, p, t| synth_columns(q, p, t).map(|r| (r, vec![RepairTag::ColumnSynthesis])),
        |q, p, t| {
            remove_clauses(q, p, t).map(|r| {
                let mut tags = vec![RepairTag::ClauseRemoval];
                if r.existing_changed {
                    tags.push(RepairTag::ColumnSynthesis);
                }
                (r.query, tags)
            })
        },
        |q, p, t| {
            synth_clauses(q, p, t).map(|r| {
                let mut tags = vec![RepairTag::ClauseSynthesis];
                if r.existing_changed {
                    tags.push(RepairTag::ColumnSynthesis);
                }
                (r.query, tags)
            })
        },
    ];

    for stage in stages {
        if timer.expired() {
            break;
        }
        // A stage that runs out of time counts as a failed stage.
        if let Ok((repaired, tags)) = stage(&q, problem, &timer) {
            operations.extend(tags);
            return done(repaired, operations, log);
        }
    }
    let reason = if timer.expired() {
        FailureReason::BudgetExceeded
    } else {
        FailureReason::Exhausted
    };
    RepairResult::unrepairable(text, reason, timer.elapsed())
}

/// Repair attempts made before giving up on a participant's history.
pub const MAX_REPAIR_FAILURES: usize = 10;

/// Repairs the most recent incorrect attempt that can be repaired.
///
/// `attempts` is in submission order. Incorrect attempts are tried newest
/// first; the search stops after [`MAX_REPAIR_FAILURES`] failed repairs.
pub fn repair_latest(
    attempts: &[(String, Triage)],
    problem: &ProblemSpec,
    budget: Budget,
) -> RepairResult {
    repair_latest_with(attempts, problem, budget, repair)
}

/// [`repair_latest`] with a caller-supplied repair function.
pub fn repair_latest_with<F>(
    attempts: &[(String, Triage)],
    problem: &ProblemSpec,
    budget: Budget,
    mut repair_fn: F,
) -> RepairResult
where
    F: FnMut(&str, &ProblemSpec, Budget) -> RepairResult,
{
    let mut failures = 0;
    let mut last = None;
    for (text, triage) in attempts.iter().rev() {
        if triage.verdict == Verdict::Correct {
            continue;
        }
        let result = repair_fn(text, problem, budget);
        if result.is_repaired() {
            return result;
        }
        last = Some(result);
        failures += 1;
        if failures == MAX_REPAIR_FAILURES {
            break;
        }
    }
    last.unwrap_or_else(|| {
        let newest = attempts.last().map_or("", |(text, _)| text.as_str());
        RepairResult::unrepairable(newest, FailureReason::Exhausted, Duration::ZERO)
    })
}
