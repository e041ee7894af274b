//! Enumerative solver over finite hole domains.
//!
//! Each leaf of the predicate is expanded into its concrete candidates, and
//! every candidate is summarized by the rows it selects across all pairs
//! (one bit per source row). Candidates selecting the same rows are
//! interchangeable, so only the first of each is kept. Assignments are then
//! enumerated by increasing number of holes changed from their original
//! value, left to right, combining row masks with `AND`-before-`OR`
//! precedence.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;

use super::{
    check, Assignment, BudgetExceeded, Hole, HoleKind, HoleQuery, HoleSite, HoleValue, SolveVerdict,
};
use crate::eval::{compile_leaf, Shape};
use crate::query::{BoolOp, CmpOp, Comparison, Operand, Side};
use crate::table::{tables_equal, ColumnType, ProblemSpec, Table, Value};

/// Extra constraints used by the repair stages.
#[derive(Clone, Copy)]
pub(crate) struct Mode {
    /// At least one hole of a kind matching this predicate must change.
    pub key: Option<fn(&HoleKind) -> bool>,
    /// Reject solutions containing a changed leaf whose removal would not
    /// change which rows are selected.
    pub reject_redundant: bool,
}

impl Mode {
    pub const PLAIN: Mode = Mode {
        key: None,
        reject_redundant: false,
    };
}

/// Searches for hole values under which `hq` passes every pair of
/// `problem`. Values closest to the original query are preferred.
pub fn solve(
    hq: &HoleQuery,
    problem: &ProblemSpec,
    budget: Duration,
) -> Result<SolveVerdict, BudgetExceeded> {
    solve_until(hq, problem, Instant::now() + budget, Mode::PLAIN)
}

pub(crate) fn solve_until(
    hq: &HoleQuery,
    problem: &ProblemSpec,
    deadline: Instant,
    mode: Mode,
) -> Result<SolveVerdict, BudgetExceeded> {
    let source = problem.source_schema();
    let Ok(shape) = Shape::compile(&hq.base, source) else {
        return Ok(SolveVerdict::Unsat);
    };
    let rows = Rows::new(problem);
    let domains = Domains::new(problem);

    let (leaves, conns) = match &hq.base.filter {
        None => (Vec::new(), Vec::new()),
        Some(pred) => {
            let mut leaves = Vec::with_capacity(pred.leaves.len());
            for (i, leaf) in pred.leaves.iter().enumerate() {
                if Instant::now() >= deadline {
                    return Err(BudgetExceeded);
                }
                leaves.push(leaf_candidates(hq, i, leaf, source, &domains, &rows, mode));
            }
            let conns = (0..pred.connectors.len())
                .map(|j| connector_candidates(hq, j, pred.connectors[j]))
                .collect();
            (leaves, conns)
        }
    };

    let mut suffix_max = vec![0u32; leaves.len() + 1];
    for pos in (0..leaves.len()).rev() {
        let leaf_max = leaves[pos]
            .iter()
            .map(|c: &Candidate| c.dist)
            .max()
            .unwrap_or(0);
        let conn_max = if pos == 0 {
            0
        } else {
            conns[pos - 1]
                .iter()
                .map(|c: &Connector| c.dist)
                .max()
                .unwrap_or(0)
        };
        suffix_max[pos] = suffix_max[pos + 1] + leaf_max + conn_max;
    }

    let memoize = mode.key.is_none() && !mode.reject_redundant;
    let mut search = Search {
        hq,
        problem,
        shape: &shape,
        rows: &rows,
        leaves,
        conns,
        suffix_max,
        mode,
        deadline,
        steps: 0,
        accepted: HashMap::new(),
        failed: memoize.then(HashSet::new),
        chosen: Vec::new(),
        found: None,
    };

    if search.leaves.is_empty() {
        let all = rows.full();
        if search.accepts(&all) && search.verify(Assignment::default()) {
            return Ok(SolveVerdict::Sat(search.found.take().unwrap_or_default()));
        }
        return Ok(SolveVerdict::Unsat);
    }

    let empty = rows.empty();
    for budget in 0..=search.suffix_max[0] {
        if search.dfs(0, &empty, &empty, budget, false)? {
            return Ok(SolveVerdict::Sat(
                search.found.take().expect("solution recorded"),
            ));
        }
    }
    Ok(SolveVerdict::Unsat)
}

/// Every source row of every pair, with the offset of each pair's first row
/// in a row mask.
struct Rows<'a> {
    tables: Vec<&'a Table>,
    offsets: Vec<usize>,
    total: usize,
}

impl<'a> Rows<'a> {
    fn new(problem: &'a ProblemSpec) -> Self {
        let mut offsets = Vec::with_capacity(problem.pairs.len());
        let mut total = 0;
        for pair in &problem.pairs {
            offsets.push(total);
            total += pair.source.rows.len();
        }
        Rows {
            tables: problem.pairs.iter().map(|p| &p.source).collect(),
            offsets,
            total,
        }
    }

    fn iter(&self) -> impl Iterator<Item = &'a [Value]> + '_ {
        self.tables
            .iter()
            .flat_map(|t| t.rows.iter().map(Vec::as_slice))
    }

    fn empty(&self) -> FixedBitSet {
        FixedBitSet::with_capacity(self.total)
    }

    fn full(&self) -> FixedBitSet {
        let mut all = self.empty();
        all.insert_range(..);
        all
    }
}

/// Candidate constants for each source column.
pub(crate) struct Domains {
    per_column: Vec<Vec<Value>>,
}

impl Domains {
    pub(crate) fn new(problem: &ProblemSpec) -> Self {
        let schema = problem.source_schema();
        let sentinel = fresh_string(problem);
        let per_column = schema
            .columns
            .iter()
            .enumerate()
            .map(|(c, column)| {
                let values: BTreeSet<&Value> = problem
                    .pairs
                    .iter()
                    .flat_map(|p| p.source.rows.iter().map(move |r| &r[c]))
                    .collect();
                match column.ty {
                    ColumnType::Int => {
                        let ints: Vec<i64> = values
                            .iter()
                            .filter_map(|v| match v {
                                Value::Int(i) => Some(*i),
                                Value::Str(_) => None,
                            })
                            .collect();
                        let (Some(&min), Some(&max)) = (ints.first(), ints.last()) else {
                            return vec![Value::Int(0)];
                        };
                        min.checked_sub(1)
                            .into_iter()
                            .chain(ints.iter().copied())
                            .chain(max.checked_add(1))
                            .map(Value::Int)
                            .collect()
                    }
                    ColumnType::Str => values
                        .into_iter()
                        .cloned()
                        .chain(std::iter::once(Value::Str(sentinel.clone())))
                        .collect(),
                }
            })
            .collect();
        Domains { per_column }
    }

    pub(crate) fn column(&self, index: usize) -> &[Value] {
        &self.per_column[index]
    }
}

/// The first of "", "_", "__", ... that occurs in no source.
fn fresh_string(problem: &ProblemSpec) -> String {
    let used: HashSet<&str> = problem
        .pairs
        .iter()
        .flat_map(|p| p.source.rows.iter().flatten())
        .filter_map(|v| match v {
            Value::Str(s) => Some(s.as_str()),
            Value::Int(_) => None,
        })
        .collect();
    let mut s = String::new();
    while used.contains(s.as_str()) {
        s.push('_');
    }
    s
}

struct Candidate {
    values: Vec<(usize, HoleValue)>,
    mask: FixedBitSet,
    dist: u32,
    key: bool,
}

struct Connector {
    hole: Option<usize>,
    bop: BoolOp,
    dist: u32,
}

/// One choice for one side of a comparison.
struct Choice<'h> {
    operand: Operand,
    index: usize,
    hole: Option<&'h Hole>,
    changed: bool,
}

fn column_choices<'h>(
    hole: Option<&'h Hole>,
    fixed: &Operand,
    source: &Table,
) -> Option<Vec<Choice<'h>>> {
    let Some(hole) = hole else {
        return Some(vec![Choice {
            operand: fixed.clone(),
            index: 0,
            hole: None,
            changed: false,
        }]);
    };
    if hole.kind != HoleKind::Col {
        return None;
    }
    let original = match &hole.original {
        Some(HoleValue::Col(c)) if source.column_index(c).is_some() => Some(c.as_str()),
        _ => None,
    };
    let names = original
        .into_iter()
        .chain(source.column_names().filter(|c| Some(*c) != original));
    Some(
        names
            .enumerate()
            .map(|(index, name)| Choice {
                operand: Operand::Column(name.to_string()),
                index,
                hole: Some(hole),
                changed: hole.original.is_some() && Some(name) != original,
            })
            .collect(),
    )
}

fn constant_choices<'h>(
    hole: Option<&'h Hole>,
    other: &Operand,
    source: &Table,
    domains: &Domains,
) -> Vec<Choice<'h>> {
    let Some(hole) = hole else {
        return Vec::new();
    };
    let Some(col) = other.column_name().and_then(|c| source.column_index(c)) else {
        return Vec::new();
    };
    let ty = source.columns[col].ty;
    let original = match &hole.original {
        Some(HoleValue::Const(v)) if v.ty() == ty => Some(v),
        _ => None,
    };
    let domain = domains.column(col).iter().filter(|v| Some(*v) != original);
    original
        .into_iter()
        .chain(domain)
        .enumerate()
        .map(|(index, v)| Choice {
            operand: Operand::from(v.clone()),
            index,
            hole: Some(hole),
            changed: hole.original.is_some() && Some(v) != original,
        })
        .collect()
}

fn operand_type(operand: &Operand, source: &Table) -> Option<ColumnType> {
    match operand {
        Operand::Column(c) => source.column_index(c).map(|i| source.columns[i].ty),
        other => other.literal_type(),
    }
}

fn leaf_candidates(
    hq: &HoleQuery,
    leaf_index: usize,
    leaf: &Comparison,
    source: &Table,
    domains: &Domains,
    rows: &Rows<'_>,
    mode: Mode,
) -> Vec<Candidate> {
    let lhs_hole = hq.hole_at(HoleSite::Operand {
        leaf: leaf_index,
        side: Side::Lhs,
    });
    let rhs_hole = hq.hole_at(HoleSite::Operand {
        leaf: leaf_index,
        side: Side::Rhs,
    });
    let op_hole = hq.hole_at(HoleSite::Op { leaf: leaf_index });

    let mut pairs: Vec<(Choice<'_>, Choice<'_>)> = Vec::new();
    match (
        column_choices(lhs_hole, &leaf.lhs, source),
        column_choices(rhs_hole, &leaf.rhs, source),
    ) {
        (Some(ls), Some(rs)) => {
            for l in &ls {
                for r in &rs {
                    pairs.push((l.clone_choice(), r.clone_choice()));
                }
            }
        }
        (None, Some(rs)) => {
            for r in rs {
                for l in constant_choices(lhs_hole, &r.operand, source, domains) {
                    pairs.push((l, r.clone_choice()));
                }
            }
        }
        (Some(ls), None) => {
            for l in ls {
                for r in constant_choices(rhs_hole, &l.operand, source, domains) {
                    pairs.push((l.clone_choice(), r));
                }
            }
        }
        (None, None) => {}
    }

    let is_key = |hole: Option<&Hole>| match (mode.key, hole) {
        (Some(key), Some(h)) => key(&h.kind),
        _ => false,
    };

    let mut out: Vec<(u32, [usize; 3], Candidate)> = Vec::new();
    for (l, r) in pairs {
        let (Some(lt), Some(rt)) = (
            operand_type(&l.operand, source),
            operand_type(&r.operand, source),
        ) else {
            continue;
        };
        if lt != rt {
            continue;
        }
        let ops: Vec<(CmpOp, bool)> = match op_hole {
            None => vec![(leaf.op, false)],
            Some(hole) => {
                let original = match hole.original {
                    Some(HoleValue::Op(op)) if CmpOp::for_type(lt).contains(&op) => Some(op),
                    _ => None,
                };
                original
                    .into_iter()
                    .chain(
                        CmpOp::for_type(lt)
                            .iter()
                            .copied()
                            .filter(|&op| Some(op) != original),
                    )
                    .map(|op| (op, hole.original.is_some() && Some(op) != original))
                    .collect()
            }
        };
        for (op_index, (op, op_changed)) in ops.into_iter().enumerate() {
            let cmp = Comparison::new(l.operand.clone(), op, r.operand.clone());
            let Ok((compiled, _)) = compile_leaf(&cmp, &source.columns) else {
                continue;
            };
            let mut mask = rows.empty();
            for (i, row) in rows.iter().enumerate() {
                if compiled.matches(row) {
                    mask.insert(i);
                }
            }
            let mut values = Vec::new();
            if let Some(h) = l.hole {
                values.push((h.id, hole_value(&l.operand)));
            }
            if let Some(h) = op_hole {
                values.push((h.id, HoleValue::Op(op)));
            }
            if let Some(h) = r.hole {
                values.push((h.id, hole_value(&r.operand)));
            }
            let dist = u32::from(l.changed) + u32::from(op_changed) + u32::from(r.changed);
            let key = (l.changed && is_key(l.hole))
                || (op_changed && is_key(op_hole))
                || (r.changed && is_key(r.hole));
            out.push((
                dist,
                [l.index, op_index, r.index],
                Candidate {
                    values,
                    mask,
                    dist,
                    key,
                },
            ));
        }
    }
    out.sort_by_key(|(dist, order, _)| (*dist, *order));

    let mut seen = HashSet::new();
    out.into_iter()
        .map(|(_, _, c)| c)
        .filter(|c| seen.insert((c.mask.clone(), c.dist > 0, c.key)))
        .collect()
}

impl Choice<'_> {
    fn clone_choice(&self) -> Self {
        Choice {
            operand: self.operand.clone(),
            index: self.index,
            hole: self.hole,
            changed: self.changed,
        }
    }
}

fn hole_value(operand: &Operand) -> HoleValue {
    match operand {
        Operand::Column(c) => HoleValue::Col(c.clone()),
        other => HoleValue::Const(other.as_value().expect("constant operand")),
    }
}

fn connector_candidates(hq: &HoleQuery, index: usize, fixed: BoolOp) -> Vec<Connector> {
    let Some(hole) = hq.hole_at(HoleSite::Connector { index }) else {
        return vec![Connector {
            hole: None,
            bop: fixed,
            dist: 0,
        }];
    };
    let original = match hole.original {
        Some(HoleValue::Bop(b)) => Some(b),
        _ => None,
    };
    original
        .into_iter()
        .chain(
            [BoolOp::And, BoolOp::Or]
                .into_iter()
                .filter(|&b| Some(b) != original),
        )
        .map(|bop| Connector {
            hole: Some(hole.id),
            bop,
            dist: u32::from(hole.original.is_some() && Some(bop) != original),
        })
        .collect()
}

/// Rows selected by a flat predicate with the given leaf masks.
fn combine(
    masks: &[&FixedBitSet],
    bops: &[BoolOp],
    full: impl FnOnce() -> FixedBitSet,
) -> FixedBitSet {
    let Some((first, rest)) = masks.split_first() else {
        return full();
    };
    let mut or = FixedBitSet::with_capacity(first.len());
    let mut term = (*first).clone();
    for (bop, mask) in bops.iter().zip(rest) {
        match bop {
            BoolOp::And => term &= *mask,
            BoolOp::Or => {
                or |= &term;
                term = (*mask).clone();
            }
        }
    }
    or |= &term;
    or
}

struct Search<'a> {
    hq: &'a HoleQuery,
    problem: &'a ProblemSpec,
    shape: &'a Shape,
    rows: &'a Rows<'a>,
    leaves: Vec<Vec<Candidate>>,
    conns: Vec<Vec<Connector>>,
    suffix_max: Vec<u32>,
    mode: Mode,
    deadline: Instant,
    steps: u64,
    accepted: HashMap<FixedBitSet, bool>,
    failed: Option<HashSet<(usize, FixedBitSet, FixedBitSet, u32)>>,
    /// (connector index, candidate index) per position on the current path.
    chosen: Vec<(usize, usize)>,
    found: Option<Assignment>,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), BudgetExceeded> {
        self.steps += 1;
        if self.steps.is_multiple_of(256) && Instant::now() >= self.deadline {
            return Err(BudgetExceeded);
        }
        Ok(())
    }

    fn accepts(&mut self, mask: &FixedBitSet) -> bool {
        if let Some(&known) = self.accepted.get(mask) {
            return known;
        }
        let ok = self
            .problem
            .pairs
            .iter()
            .zip(&self.rows.offsets)
            .all(|(pair, &offset)| {
                let out = self
                    .shape
                    .output(&pair.source, |i| mask.contains(offset + i));
                tables_equal(&out, &pair.destination, pair.ordered)
            });
        self.accepted.insert(mask.clone(), ok);
        ok
    }

    /// Confirms a candidate solution by running the substituted query.
    fn verify(&mut self, assignment: Assignment) -> bool {
        let q = self.hq.substitute(&assignment);
        if check(&q, self.problem) == Ok(true) {
            self.found = Some(assignment);
            true
        } else {
            false
        }
    }

    fn dfs(
        &mut self,
        pos: usize,
        or: &FixedBitSet,
        term: &FixedBitSet,
        remaining: u32,
        key: bool,
    ) -> Result<bool, BudgetExceeded> {
        self.tick()?;
        if pos == self.leaves.len() {
            return Ok(remaining == 0 && self.finish(or, term, key));
        }
        let memo_key = match &self.failed {
            Some(failed) if pos > 0 => {
                let k = (pos, or.clone(), term.clone(), remaining);
                if failed.contains(&k) {
                    return Ok(false);
                }
                Some(k)
            }
            _ => None,
        };

        let conn_count = if pos == 0 {
            1
        } else {
            self.conns[pos - 1].len()
        };
        for ci in 0..conn_count {
            let (cdist, bop) = match pos {
                0 => (0, None),
                _ => {
                    let c = &self.conns[pos - 1][ci];
                    (c.dist, Some(c.bop))
                }
            };
            if cdist > remaining {
                continue;
            }
            for li in 0..self.leaves[pos].len() {
                let cand = &self.leaves[pos][li];
                let d = cdist + cand.dist;
                if d > remaining || remaining - d > self.suffix_max[pos + 1] {
                    continue;
                }
                let (next_or, next_term) = match bop {
                    None => (or.clone(), cand.mask.clone()),
                    Some(BoolOp::And) => (or.clone(), term & &cand.mask),
                    Some(BoolOp::Or) => (or | term, cand.mask.clone()),
                };
                let next_key = key || cand.key;
                self.chosen.push((ci, li));
                if self.dfs(pos + 1, &next_or, &next_term, remaining - d, next_key)? {
                    return Ok(true);
                }
                self.chosen.pop();
            }
        }

        if let (Some(failed), Some(k)) = (self.failed.as_mut(), memo_key) {
            failed.insert(k);
        }
        Ok(false)
    }

    fn finish(&mut self, or: &FixedBitSet, term: &FixedBitSet, key: bool) -> bool {
        if self.mode.key.is_some() && !key {
            return false;
        }
        let selected = or | term;
        if !self.accepts(&selected) {
            return false;
        }
        if self.mode.reject_redundant && self.has_redundant_change(&selected) {
            return false;
        }
        let mut assignment = Assignment::default();
        for (pos, &(ci, li)) in self.chosen.iter().enumerate() {
            for (id, value) in &self.leaves[pos][li].values {
                assignment.insert(*id, value.clone());
            }
            if pos > 0 {
                let c = &self.conns[pos - 1][ci];
                if let Some(id) = c.hole {
                    assignment.insert(id, HoleValue::Bop(c.bop));
                }
            }
        }
        self.verify(assignment)
    }

    fn has_redundant_change(&self, selected: &FixedBitSet) -> bool {
        let masks: Vec<&FixedBitSet> = self
            .chosen
            .iter()
            .enumerate()
            .map(|(pos, &(_, li))| &self.leaves[pos][li].mask)
            .collect();
        let bops: Vec<BoolOp> = self
            .chosen
            .iter()
            .enumerate()
            .skip(1)
            .map(|(pos, &(ci, _))| self.conns[pos - 1][ci].bop)
            .collect();
        (0..masks.len()).any(|i| {
            if self.leaves[i][self.chosen[i].1].dist == 0 {
                return false;
            }
            let mut m = masks.clone();
            let mut b = bops.clone();
            m.remove(i);
            if !b.is_empty() {
                b.remove(i.saturating_sub(1));
            }
            combine(&m, &b, || self.rows.full()) == *selected
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fruit_problem;
    use crate::query::parse_lenient;

    #[test]
    fn int_domain_brackets_values() {
        let p = fruit_problem();
        let d = Domains::new(&p);
        let quantity = p.source_schema().column_index("quantity").unwrap();
        let values: Vec<i64> = d
            .column(quantity)
            .iter()
            .map(|v| match v {
                Value::Int(i) => *i,
                Value::Str(_) => unreachable!(),
            })
            .collect();
        assert_eq!(values, vec![199, 200, 300, 400, 500, 501]);
    }

    #[test]
    fn str_domain_ends_with_fresh_value() {
        let p = fruit_problem();
        let d = Domains::new(&p);
        let country = p.source_schema().column_index("country").unwrap();
        let dom = d.column(country);
        assert_eq!(dom.last(), Some(&Value::Str(String::new())));
        assert_eq!(dom.len(), 4);
    }

    #[test]
    fn combine_respects_precedence() {
        let bits = |v: &[usize]| {
            let mut m = FixedBitSet::with_capacity(4);
            v.iter().for_each(|&i| m.insert(i));
            m
        };
        let (a, b, c) = (bits(&[0]), bits(&[0, 1]), bits(&[2]));
        // a OR b AND c = a OR (b AND c)
        let got = combine(&[&a, &b, &c], &[BoolOp::Or, BoolOp::And], || {
            bits(&[0, 1, 2, 3])
        });
        assert_eq!(got, bits(&[0]));
    }

    #[test]
    fn closed_query_that_passes_is_sat() {
        let p = fruit_problem();
        let q = parse_lenient(
            "SELECT item, price, quantity, country FROM fruitSellers WHERE item = 'grapes'",
        )
        .unwrap();
        let v = solve(&HoleQuery::closed(q), &p, Duration::from_secs(2)).unwrap();
        assert_eq!(v, SolveVerdict::Sat(Assignment::default()));
    }
}
