//! Synthesis stages: which holes each stage opens and how results are
//! accepted.

use super::search::{solve_until, Mode};
use super::{
    check, Hole, HoleKind, HoleQuery, HoleSite, HoleValue, SolveVerdict, SynthError, Timer,
};
use crate::eval::compile_leaf;
use crate::query::{BoolOp, CmpOp, Comparison, Operand, Predicate, Query, Side};
use crate::table::{ColumnType, ProblemSpec, Table};

/// Largest predicate clause synthesis will build.
pub const MAX_LEAVES: usize = 5;

/// Result of a stage that may also rewrite columns of existing leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Synthesized {
    pub query: Query,
    /// Whether leaves kept from the input were modified.
    pub existing_changed: bool,
}

#[derive(Clone, Copy, Default)]
struct Open {
    consts: bool,
    ops: bool,
    cols: bool,
    connectors: bool,
}

impl Open {
    const ALL: Open = Open {
        consts: true,
        ops: true,
        cols: true,
        connectors: true,
    };
}

struct Builder<'a> {
    source: &'a Table,
    holes: Vec<Hole>,
}

impl Builder<'_> {
    fn push(&mut self, kind: HoleKind, site: HoleSite, original: Option<HoleValue>) {
        let id = self.holes.len();
        self.holes.push(Hole {
            id,
            kind,
            site,
            original,
        });
    }

    fn leaf(&mut self, index: usize, leaf: &Comparison, open: Open) {
        let both_constant = leaf.lhs.is_constant() && leaf.rhs.is_constant();
        for side in [Side::Lhs, Side::Rhs] {
            let operand = leaf.operand(side);
            let other = leaf.operand(side.other());
            let site = HoleSite::Operand { leaf: index, side };
            match operand {
                Operand::Column(c) if open.cols => {
                    self.push(HoleKind::Col, site, Some(HoleValue::Col(c.clone())));
                }
                Operand::Int(_) | Operand::Str(_)
                    if open.consts && !both_constant && matches!(other, Operand::Column(_)) =>
                {
                    let value = operand.as_value().expect("constant");
                    self.push(
                        HoleKind::Const(value.ty()),
                        site,
                        Some(HoleValue::Const(value)),
                    );
                }
                _ => {}
            }
            if side == Side::Lhs && open.ops {
                let ty = compile_leaf(leaf, &self.source.columns)
                    .map(|(_, ty)| ty)
                    .ok()
                    .or_else(|| leaf.lhs.literal_type())
                    .or_else(|| leaf.rhs.literal_type())
                    .unwrap_or(ColumnType::Int);
                self.push(
                    HoleKind::Op(ty),
                    HoleSite::Op { leaf: index },
                    Some(HoleValue::Op(leaf.op)),
                );
            }
        }
    }
}

/// Opens holes of the requested kinds in the chosen leaves of `q`.
fn abstract_query(q: &Query, source: &Table, open: Open, leaves: &[usize]) -> HoleQuery {
    let mut b = Builder {
        source,
        holes: Vec::new(),
    };
    if let Some(pred) = &q.filter {
        for (i, leaf) in pred.leaves.iter().enumerate() {
            if i > 0 && open.connectors {
                b.push(
                    HoleKind::Bop,
                    HoleSite::Connector { index: i - 1 },
                    Some(HoleValue::Bop(pred.connectors[i - 1])),
                );
            }
            if leaves.contains(&i) {
                b.leaf(i, leaf, open);
            }
        }
    }
    HoleQuery {
        base: q.clone(),
        holes: b.holes,
    }
}

/// Appends `count` leaves of the form `BOP COL OP CONST`, all holes.
fn append_leaves(hq: &mut HoleQuery, count: usize, source: &Table) {
    let first_column = source
        .columns
        .first()
        .map(|c| c.name.clone())
        .unwrap_or_default();
    let first_type = source.columns.first().map_or(ColumnType::Int, |c| c.ty);
    for _ in 0..count {
        let placeholder = Comparison::new(
            Operand::Column(first_column.clone()),
            CmpOp::Eq,
            Operand::Bare("?".into()),
        );
        let pred = hq.base.filter.get_or_insert_with(|| Predicate {
            leaves: Vec::new(),
            connectors: Vec::new(),
        });
        let leaf = pred.leaves.len();
        if leaf > 0 {
            pred.connectors.push(BoolOp::And);
        }
        pred.leaves.push(placeholder);
        let mut push = |kind, site| {
            let id = hq.holes.len();
            hq.holes.push(Hole {
                id,
                kind,
                site,
                original: None,
            });
        };
        if leaf > 0 {
            push(HoleKind::Bop, HoleSite::Connector { index: leaf - 1 });
        }
        push(
            HoleKind::Col,
            HoleSite::Operand {
                leaf,
                side: Side::Lhs,
            },
        );
        push(HoleKind::Op(first_type), HoleSite::Op { leaf });
        push(
            HoleKind::Const(first_type),
            HoleSite::Operand {
                leaf,
                side: Side::Rhs,
            },
        );
    }
}

fn run(
    hq: &HoleQuery,
    problem: &ProblemSpec,
    timer: &Timer,
    mode: Mode,
) -> Result<Query, SynthError> {
    if timer.expired() {
        return Err(SynthError::BudgetExceeded);
    }
    match solve_until(hq, problem, timer.solve_deadline(), mode)? {
        SolveVerdict::Sat(a) => Ok(hq.substitute(&a)),
        SolveVerdict::Unsat => Err(SynthError::Unsat),
    }
}

fn staged(key: fn(&HoleKind) -> bool) -> Mode {
    Mode {
        key: Some(key),
        reject_redundant: true,
    }
}

fn all_leaves(q: &Query) -> Vec<usize> {
    (0..q.leaf_count()).collect()
}

/// Replaces every WHERE constant compared against a column.
pub fn synth_constants(
    q: &Query,
    problem: &ProblemSpec,
    timer: &Timer,
) -> Result<Query, SynthError> {
    if q.filter.is_none() {
        return Err(SynthError::Unsat);
    }
    let open = Open {
        consts: true,
        ..Open::default()
    };
    let hq = abstract_query(q, problem.source_schema(), open, &all_leaves(q));
    if hq.holes.is_empty() {
        return Err(SynthError::Unsat);
    }
    run(
        &hq,
        problem,
        timer,
        staged(|k| matches!(k, HoleKind::Const(_))),
    )
}

/// Replaces every WHERE comparison operator. Constants stay open so that a
/// new operator can come with a new threshold; at least one operator must
/// change.
pub fn synth_operators(
    q: &Query,
    problem: &ProblemSpec,
    timer: &Timer,
) -> Result<Query, SynthError> {
    if q.filter.is_none() {
        return Err(SynthError::Unsat);
    }
    let open = Open {
        consts: true,
        ops: true,
        ..Open::default()
    };
    let hq = abstract_query(q, problem.source_schema(), open, &all_leaves(q));
    run(
        &hq,
        problem,
        timer,
        staged(|k| matches!(k, HoleKind::Op(_))),
    )
}

/// Replaces the columns of WHERE comparisons, first all at once and then,
/// if that runs out of time, one comparison at a time from the left.
/// Operators and constants of an opened comparison are open as well; at
/// least one column must change.
pub fn synth_columns(q: &Query, problem: &ProblemSpec, timer: &Timer) -> Result<Query, SynthError> {
    if q.filter.is_none() {
        return Err(SynthError::Unsat);
    }
    let source = problem.source_schema();
    let mode = staged(|k| *k == HoleKind::Col);
    let open = Open {
        consts: true,
        ops: true,
        cols: true,
        connectors: false,
    };
    let hq = abstract_query(q, source, open, &all_leaves(q));
    if !hq.holes.iter().any(|h| h.kind == HoleKind::Col) {
        return Err(SynthError::Unsat);
    }
    match run(&hq, problem, timer, mode) {
        Err(SynthError::BudgetExceeded) if !timer.expired() => {}
        other => return other,
    }
    let mut outcome = Err(SynthError::BudgetExceeded);
    for leaf in all_leaves(q) {
        let hq = abstract_query(q, source, open, &[leaf]);
        match run(&hq, problem, timer, mode) {
            Ok(repaired) => return Ok(repaired),
            Err(SynthError::BudgetExceeded) if timer.expired() => {
                return Err(SynthError::BudgetExceeded)
            }
            Err(e) => outcome = Err(e),
        }
    }
    outcome
}

/// Drops leaves, keeping as many as possible, and retries column synthesis
/// on what remains. Subsets are tried by decreasing size, then in
/// lexicographic order of leaf index.
pub fn remove_clauses(
    q: &Query,
    problem: &ProblemSpec,
    timer: &Timer,
) -> Result<Synthesized, SynthError> {
    let Some(pred) = &q.filter else {
        return Err(SynthError::Unsat);
    };
    let n = pred.leaves.len();
    if n < 2 {
        return Err(SynthError::Unsat);
    }
    let mut budget_hit = false;
    for k in (1..n).rev() {
        for keep in combinations(n, k) {
            if timer.expired() {
                return Err(SynthError::BudgetExceeded);
            }
            let mut candidate = q.clone();
            candidate.filter = Some(pred.retain(&keep));
            if check(&candidate, problem) == Ok(true) {
                return Ok(Synthesized {
                    query: candidate,
                    existing_changed: false,
                });
            }
            match synth_columns(&candidate, problem, timer) {
                Ok(query) => {
                    return Ok(Synthesized {
                        query,
                        existing_changed: true,
                    })
                }
                Err(SynthError::BudgetExceeded) => budget_hit = true,
                Err(SynthError::Unsat) => {}
            }
        }
    }
    Err(if budget_hit {
        SynthError::BudgetExceeded
    } else {
        SynthError::Unsat
    })
}

/// Size-`k` subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Opens every part of every existing leaf and connector, then appends
/// `BOP COL OP CONST` leaves one at a time until the query passes or the
/// predicate would exceed [`MAX_LEAVES`].
pub fn synth_clauses(
    q: &Query,
    problem: &ProblemSpec,
    timer: &Timer,
) -> Result<Synthesized, SynthError> {
    let n = q.leaf_count();
    if n > MAX_LEAVES {
        return Err(SynthError::Unsat);
    }
    let source = problem.source_schema();
    let mut budget_hit = false;
    for k in n..=MAX_LEAVES {
        if k == 0 {
            if check(q, problem) == Ok(true) {
                return Ok(Synthesized {
                    query: q.clone(),
                    existing_changed: false,
                });
            }
            continue;
        }
        let mut hq = abstract_query(q, source, Open::ALL, &all_leaves(q));
        append_leaves(&mut hq, k - n, source);
        match run(&hq, problem, timer, Mode::PLAIN) {
            Ok(query) => {
                let existing_changed = existing_changed(q, &query);
                return Ok(Synthesized {
                    query,
                    existing_changed,
                });
            }
            Err(SynthError::BudgetExceeded) if timer.expired() => {
                return Err(SynthError::BudgetExceeded)
            }
            Err(SynthError::BudgetExceeded) => budget_hit = true,
            Err(SynthError::Unsat) => {}
        }
    }
    Err(if budget_hit {
        SynthError::BudgetExceeded
    } else {
        SynthError::Unsat
    })
}

fn existing_changed(before: &Query, after: &Query) -> bool {
    match (&before.filter, &after.filter) {
        (Some(b), Some(a)) => {
            let n = b.leaves.len();
            a.leaves[..n] != b.leaves[..] || a.connectors[..n - 1] != b.connectors[..]
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fruit_problem;
    use crate::query::{parse_lenient, print};
    use crate::synth::{solve, Budget};
    use std::time::Duration;

    fn q(text: &str) -> Query {
        parse_lenient(text).unwrap()
    }

    const HEAD: &str = "SELECT item, price, quantity, country FROM fruitSellers";

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(combinations(3, 1), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn hole_numbering() {
        let p = fruit_problem();
        let base = q(&format!("{HEAD} WHERE country = 'US' AND quantity < 800"));
        let hq = abstract_query(
            &base,
            p.source_schema(),
            Open {
                consts: true,
                ops: true,
                ..Open::default()
            },
            &[1],
        );
        assert_eq!(
            hq.to_string(),
            format!("{HEAD} WHERE country = 'US' AND quantity OP_1 CONST_1")
        );
        let mut hq = abstract_query(&q(HEAD), p.source_schema(), Open::ALL, &[]);
        append_leaves(&mut hq, 2, p.source_schema());
        assert_eq!(
            hq.to_string(),
            format!("{HEAD} WHERE COL_1 OP_1 CONST_1 BOP_1 COL_2 OP_2 CONST_2")
        );
    }

    #[test]
    fn running_example_solve() {
        let p = fruit_problem();
        let base = q(&format!("{HEAD} WHERE country = 'US' AND quantity < 800"));
        let hq = abstract_query(
            &base,
            p.source_schema(),
            Open {
                consts: true,
                ops: true,
                ..Open::default()
            },
            &[1],
        );
        let SolveVerdict::Sat(a) = solve(&hq, &p, Duration::from_secs(2)).unwrap() else {
            panic!("expected a solution");
        };
        assert_eq!(check(&hq.substitute(&a), &p), Ok(true));
    }

    #[test]
    fn constants_stage() {
        let p = fruit_problem();
        let timer = Budget::default().start();
        let fixed = synth_constants(&q(&format!("{HEAD} WHERE price < 0")), &p, &timer).unwrap();
        assert_eq!(print(&fixed).unwrap(), format!("{HEAD} WHERE price < 3"));
    }

    #[test]
    fn operators_stage_must_change_an_operator() {
        let p = fruit_problem();
        let timer = Budget::default().start();
        let fixed = synth_operators(&q(&format!("{HEAD} WHERE price > 2")), &p, &timer).unwrap();
        assert_eq!(print(&fixed).unwrap(), format!("{HEAD} WHERE price < 2"));
    }

    #[test]
    fn clause_synthesis_from_nothing() {
        let p = fruit_problem();
        let timer = Budget::default().start();
        let got = synth_clauses(&q(HEAD), &p, &timer).unwrap();
        assert_eq!(got.query.leaf_count(), 1);
        assert_eq!(check(&got.query, &p), Ok(true));
        assert!(!got.existing_changed);
    }

    #[test]
    fn removal_needs_two_leaves() {
        let p = fruit_problem();
        let timer = Budget::default().start();
        let single = q(&format!("{HEAD} WHERE price < 0"));
        assert_eq!(remove_clauses(&single, &p, &timer), Err(SynthError::Unsat));
    }

    #[test]
    fn removal_keeps_the_useful_leaf() {
        let p = fruit_problem();
        let timer = Budget::default().start();
        let got = remove_clauses(
            &q(&format!("{HEAD} WHERE item = 'grapes' OR country = 'US'")),
            &p,
            &timer,
        )
        .unwrap();
        assert_eq!(
            print(&got.query).unwrap(),
            format!("{HEAD} WHERE item = 'grapes'")
        );
        assert!(!got.existing_changed);
    }

    #[test]
    fn redundant_leaf_blocks_constant_stage() {
        // Neutralizing the OR leaf with an absent value would be a disguised
        // clause removal.
        let p = fruit_problem();
        let timer = Budget::default().start();
        let query = q(&format!("{HEAD} WHERE item = 'grapes' OR country = 'US'"));
        assert_eq!(synth_constants(&query, &p, &timer), Err(SynthError::Unsat));
    }
}
