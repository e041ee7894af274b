//! Test-side oracles: a direct row-by-row interpreter, a random case
//! generator and a brute-force WHERE enumerator. None of this calls into the
//! library's evaluator or synthesizer.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use sqlmend::query::{
    BoolOp, CmpOp, Comparison, Direction, Operand, OrderBy, Predicate, Query, SelectItem,
    SelectList,
};
use sqlmend::table::{load_problem, Column, ColumnType, ProblemSpec, Table, TablePair, Value};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(id: &str) -> ProblemSpec {
    load_problem(fixture_dir().join("problems").join(format!("{id}.json"))).unwrap()
}

// ---------------------------------------------------------------------------
// Reference interpreter

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

fn cell(t: &Table, row: &[Value], operand: &Operand) -> Option<Value> {
    match operand {
        Operand::Column(c) => {
            let i = t.columns.iter().position(|col| &col.name == c)?;
            Some(row[i].clone())
        }
        Operand::Int(i) => Some(Value::Int(*i)),
        Operand::Str(s) => Some(Value::Str(s.clone())),
        Operand::Bare(_) => None,
    }
}

fn compare(a: &Value, op: CmpOp, b: &Value) -> Option<bool> {
    let ord = match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        _ => return None,
    };
    Some(match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Ne => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Le => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Ge => ord.is_ge(),
    })
}

fn leaf_holds(t: &Table, row: &[Value], leaf: &Comparison) -> Option<bool> {
    compare(
        &cell(t, row, &leaf.lhs)?,
        leaf.op,
        &cell(t, row, &leaf.rhs)?,
    )
}

/// `a AND b OR c AND d` read left to right with AND binding tighter.
pub fn predicate_holds(t: &Table, row: &[Value], p: &Predicate) -> Option<bool> {
    let mut any = false;
    let mut run = leaf_holds(t, row, &p.leaves[0])?;
    for (i, bop) in p.connectors.iter().enumerate() {
        let next = leaf_holds(t, row, &p.leaves[i + 1])?;
        match bop {
            BoolOp::And => run = run && next,
            BoolOp::Or => {
                any = any || run;
                run = next;
            }
        }
    }
    Some(any || run)
}

/// Runs `q` on `t`, or `None` if the query cannot run.
pub fn reference_eval(q: &Query, t: &Table) -> Option<Output> {
    if q.table != t.name || !q.lenient.is_empty() {
        return None;
    }
    let find = |name: &str| t.columns.iter().position(|c| c.name == name);
    let (cols, names): (Vec<usize>, Vec<String>) = match &q.select {
        SelectList::Star => (0..t.columns.len())
            .map(|i| (i, t.columns[i].name.clone()))
            .unzip(),
        SelectList::Items(items) => {
            let mut out = (Vec::new(), Vec::new());
            for it in items {
                out.0.push(find(&it.column)?);
                out.1
                    .push(it.alias.clone().unwrap_or_else(|| it.column.clone()));
            }
            out
        }
    };
    let mut kept: Vec<&Vec<Value>> = Vec::new();
    for row in &t.rows {
        let keep = match &q.filter {
            Some(p) => predicate_holds(t, row, p)?,
            None => true,
        };
        if keep {
            kept.push(row);
        }
    }
    if let Some(order) = &q.order_by {
        let key = find(&order.column).or_else(|| match &q.select {
            SelectList::Items(items) => items
                .iter()
                .find(|it| it.alias.as_deref() == Some(&order.column))
                .and_then(|it| find(&it.column)),
            SelectList::Star => None,
        })?;
        kept.sort_by(|a, b| {
            let o = a[key].cmp(&b[key]);
            if order.direction == Direction::Desc {
                o.reverse()
            } else {
                o
            }
        });
    }
    let mut rows: Vec<Vec<Value>> = Vec::new();
    for row in kept {
        let projected: Vec<Value> = cols.iter().map(|&i| row[i].clone()).collect();
        if !q.distinct || !rows.contains(&projected) {
            rows.push(projected);
        }
    }
    Some(Output { names, rows })
}

pub fn same_bag(a: &[Vec<Value>], b: &[Vec<Value>]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort();
    y.sort();
    x == y
}

/// Whether `q` maps every source of `p` to its destination.
pub fn reference_passes(q: &Query, p: &ProblemSpec) -> bool {
    p.pairs
        .iter()
        .all(|pair| match reference_eval(q, &pair.source) {
            None => false,
            Some(out) => {
                let dst = &pair.destination;
                let names: Vec<&str> = dst.columns.iter().map(|c| c.name.as_str()).collect();
                let types_match = out.rows.first().is_none_or(|r| {
                    r.iter().zip(&dst.columns).all(|(v, c)| {
                        matches!(
                            (v, c.ty),
                            (Value::Int(_), ColumnType::Int) | (Value::Str(_), ColumnType::Str)
                        )
                    })
                });
                out.names.iter().map(String::as_str).eq(names)
                    && types_match
                    && if pair.ordered {
                        out.rows == dst.rows
                    } else {
                        same_bag(&out.rows, &dst.rows)
                    }
            }
        })
}

// ---------------------------------------------------------------------------
// Random problems and mutated gold queries

pub const TABLE: &str = "t";
const STRINGS: [&str; 4] = ["ant", "bee", "cat", "dog"];

#[derive(Clone, Debug)]
pub struct Case {
    pub seed: u64,
    pub problem: ProblemSpec,
    pub gold: Query,
    pub text: String,
}

fn domain(rng: &mut StdRng, ty: ColumnType) -> Vec<Value> {
    match ty {
        ColumnType::Int => {
            let mut v: Vec<i64> = (0..10).collect();
            v.sort_by_key(|_| rng.random::<u32>());
            v.truncate(3);
            v.sort();
            v.into_iter().map(Value::Int).collect()
        }
        ColumnType::Str => {
            let mut v: Vec<&str> = STRINGS.to_vec();
            v.sort_by_key(|_| rng.random::<u32>());
            v.truncate(3);
            v.sort();
            v.into_iter().map(Value::from).collect()
        }
    }
}

fn random_leaf(rng: &mut StdRng, columns: &[Column], domains: &[Vec<Value>]) -> Comparison {
    let c = rng.random_range(0..columns.len());
    let op = *CmpOp::for_type(columns[c].ty).choose(rng).unwrap();
    let v = domains[c].choose(rng).unwrap().clone();
    Comparison::new(
        Operand::Column(columns[c].name.clone()),
        op,
        Operand::from(v),
    )
}

fn random_predicate(
    rng: &mut StdRng,
    columns: &[Column],
    domains: &[Vec<Value>],
    max: usize,
) -> Predicate {
    let n = rng.random_range(1..=max);
    let leaves = (0..n).map(|_| random_leaf(rng, columns, domains)).collect();
    let connectors = (1..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                BoolOp::And
            } else {
                BoolOp::Or
            }
        })
        .collect();
    Predicate { leaves, connectors }
}

/// A random problem (1-2 pairs, at most 4 rows and 3 columns per table,
/// 3 values per column), its gold query, and a mutated submission.
pub fn random_case(seed: u64) -> Case {
    let mut rng = StdRng::seed_from_u64(seed);
    let ncols = rng.random_range(1..=3);
    let columns: Vec<Column> = (0..ncols)
        .map(|i| {
            let ty = if rng.random_bool(0.5) {
                ColumnType::Int
            } else {
                ColumnType::Str
            };
            Column::new(format!("c{i}"), ty)
        })
        .collect();
    let domains: Vec<Vec<Value>> = columns.iter().map(|c| domain(&mut rng, c.ty)).collect();

    let select = if rng.random_bool(0.3) {
        SelectList::Star
    } else {
        let mut items: Vec<SelectItem> = columns
            .iter()
            .filter(|_| rng.random_bool(0.6))
            .map(|c| SelectItem::column(c.name.clone()))
            .collect();
        if items.is_empty() {
            items.push(SelectItem::column(columns[0].name.clone()));
        }
        SelectList::Items(items)
    };
    let gold = Query {
        distinct: rng.random_bool(0.2),
        select,
        table: TABLE.into(),
        filter: Some(random_predicate(&mut rng, &columns, &domains, 2)),
        order_by: None,
        lenient: Vec::new(),
    };

    let npairs = rng.random_range(1..=2);
    let pairs = (0..npairs)
        .map(|_| {
            let nrows = rng.random_range(1..=4);
            let rows: Vec<Vec<Value>> = (0..nrows)
                .map(|_| {
                    domains
                        .iter()
                        .map(|d| d.choose(&mut rng).unwrap().clone())
                        .collect()
                })
                .collect();
            let source = Table::new(TABLE, columns.clone(), rows).unwrap();
            let out = reference_eval(&gold, &source).unwrap();
            let dst_cols = out
                .names
                .iter()
                .map(|n| {
                    let base = match &gold.select {
                        SelectList::Star => n.as_str(),
                        SelectList::Items(items) => {
                            &items
                                .iter()
                                .find(|it| it.output_name() == n)
                                .unwrap()
                                .column
                        }
                    };
                    Column::new(
                        n.clone(),
                        source.columns[source.column_index(base).unwrap()].ty,
                    )
                })
                .collect();
            let destination = Table::new("result", dst_cols, out.rows).unwrap();
            TablePair {
                source,
                destination,
                ordered: false,
            }
        })
        .collect();
    let problem = ProblemSpec {
        id: format!("random-{seed}"),
        description: String::new(),
        pairs,
    };

    let mut q = gold.clone();
    for _ in 0..rng.random_range(1..=2) {
        mutate(&mut rng, &mut q, &columns, &domains);
    }
    let text = lenient_text(&mut rng, &q, &columns);
    Case {
        seed,
        problem,
        gold,
        text,
    }
}

fn mutate(rng: &mut StdRng, q: &mut Query, columns: &[Column], domains: &[Vec<Value>]) {
    let type_of = |name: &str| columns.iter().position(|c| c.name == name).unwrap();
    match rng.random_range(0..8) {
        0 | 1 => {
            if let Some(p) = &mut q.filter {
                let leaf = rng.random_range(0..p.leaves.len());
                let Operand::Column(c) = &p.leaves[leaf].lhs else {
                    return;
                };
                let i = type_of(c);
                let v = match columns[i].ty {
                    ColumnType::Int => Value::Int(rng.random_range(-1..=10)),
                    ColumnType::Str => Value::from(*STRINGS.choose(rng).unwrap()),
                };
                p.leaves[leaf].rhs = Operand::from(v);
            }
        }
        2 => {
            if let Some(p) = &mut q.filter {
                let leaf = rng.random_range(0..p.leaves.len());
                let Operand::Column(c) = &p.leaves[leaf].lhs else {
                    return;
                };
                p.leaves[leaf].op = *CmpOp::for_type(columns[type_of(c)].ty).choose(rng).unwrap();
            }
        }
        3 => {
            if let Some(p) = &mut q.filter {
                let leaf = rng.random_range(0..p.leaves.len());
                p.leaves[leaf] = random_leaf(rng, columns, domains);
            }
        }
        4 => match &mut q.filter {
            Some(p) if p.leaves.len() > 1 => {
                let i = rng.random_range(0..p.leaves.len());
                *p = p.without_leaf(i).unwrap();
            }
            _ => q.filter = None,
        },
        5 => {
            let leaf = random_leaf(rng, columns, domains);
            let bop = if rng.random_bool(0.5) {
                BoolOp::And
            } else {
                BoolOp::Or
            };
            match &mut q.filter {
                Some(p) => {
                    p.leaves.push(leaf);
                    p.connectors.push(bop);
                }
                None => q.filter = Some(Predicate::single(leaf)),
            }
        }
        6 => {
            if let Some(p) = &mut q.filter {
                if let Some(c) = p.connectors.first_mut() {
                    *c = if *c == BoolOp::And {
                        BoolOp::Or
                    } else {
                        BoolOp::And
                    };
                }
            }
        }
        _ => match &mut q.select {
            SelectList::Items(items) if items.len() > 1 => {
                items.pop();
            }
            SelectList::Items(items) if items.len() < columns.len() => {
                let missing = columns
                    .iter()
                    .find(|c| !items.iter().any(|it| it.column == c.name))
                    .unwrap();
                items.push(SelectItem::column(missing.name.clone()));
            }
            _ => q.distinct = !q.distinct,
        },
    }
}

/// Prints `q`, sometimes with the lenient spellings students use.
fn lenient_text(rng: &mut StdRng, q: &Query, columns: &[Column]) -> String {
    let mut text = q.to_string();
    if rng.random_bool(0.15) {
        text = text.replacen(" = ", " == ", 1);
    }
    if rng.random_bool(0.15) {
        text = text.replacen(" AND ", " && ", 1);
    }
    if rng.random_bool(0.15) {
        for s in STRINGS {
            let quoted = format!("'{s}'");
            if text.contains(&quoted) && !columns.iter().any(|c| c.name == s) {
                let replacement = if rng.random_bool(0.5) {
                    s.to_string()
                } else {
                    format!("\"{s}\"")
                };
                text = text.replacen(&quoted, &replacement, 1);
                break;
            }
        }
    }
    text
}

// ---------------------------------------------------------------------------
// Brute-force WHERE enumeration

pub const MAX_LEAVES: usize = 5;

/// Every `COL op CONST` leaf over the columns of `p`, with constants drawn
/// from the values in the sources plus a margin around them.
fn all_leaves(p: &ProblemSpec) -> Vec<Comparison> {
    let schema = &p.pairs[0].source;
    let mut leaves = Vec::new();
    for (i, col) in schema.columns.iter().enumerate() {
        let values: BTreeSet<Value> = p
            .pairs
            .iter()
            .flat_map(|pair| pair.source.rows.iter().map(move |r| r[i].clone()))
            .collect();
        let constants: Vec<Operand> = match col.ty {
            ColumnType::Int => {
                let ints: Vec<i64> = values
                    .iter()
                    .map(|v| if let Value::Int(x) = v { *x } else { 0 })
                    .collect();
                let lo = ints.iter().min().copied().unwrap_or(0) - 2;
                let hi = ints.iter().max().copied().unwrap_or(0) + 2;
                (lo..=hi).map(Operand::Int).collect()
            }
            ColumnType::Str => values
                .iter()
                .map(|v| Operand::from(v.clone()))
                .chain(std::iter::once(Operand::Str("zzz-unseen".into())))
                .collect(),
        };
        for &op in &CmpOp::ALL {
            for k in &constants {
                leaves.push(Comparison::new(
                    Operand::Column(col.name.clone()),
                    op,
                    k.clone(),
                ));
            }
        }
    }
    leaves
}

type Mask = u64;

fn rows_of(p: &ProblemSpec) -> Vec<(usize, usize)> {
    p.pairs
        .iter()
        .enumerate()
        .flat_map(|(pi, pair)| (0..pair.source.rows.len()).map(move |r| (pi, r)))
        .collect()
}

/// Searches every predicate of at most [`MAX_LEAVES`] leaves (by the set of
/// rows it selects) for one that makes `shape` pass when used as its WHERE
/// clause. Returns a witness query.
pub fn brute_force_where(shape: &Query, p: &ProblemSpec) -> Option<Query> {
    let rows = rows_of(p);
    assert!(rows.len() <= 64);
    let mask_of = |pred: &Predicate| -> Option<Mask> {
        let mut m = 0;
        for (bit, &(pi, r)) in rows.iter().enumerate() {
            let src = &p.pairs[pi].source;
            if predicate_holds(src, &src.rows[r], pred)? {
                m |= 1 << bit;
            }
        }
        Some(m)
    };

    // Cheapest predicate realizing each mask, built up from leaves.
    let mut leaf_best: BTreeMap<Mask, Comparison> = BTreeMap::new();
    for leaf in all_leaves(p) {
        if let Some(m) = mask_of(&Predicate::single(leaf.clone())) {
            leaf_best.entry(m).or_insert(leaf);
        }
    }
    let mut runs: BTreeMap<Mask, Vec<Comparison>> = leaf_best
        .iter()
        .map(|(m, l)| (*m, vec![l.clone()]))
        .collect();
    let mut frontier: Vec<Mask> = runs.keys().copied().collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for m in frontier {
            let run = runs[&m].clone();
            if run.len() >= MAX_LEAVES {
                continue;
            }
            for (lm, leaf) in &leaf_best {
                let nm = m & lm;
                if let std::collections::btree_map::Entry::Vacant(slot) = runs.entry(nm) {
                    let mut r = run.clone();
                    r.push(leaf.clone());
                    slot.insert(r);
                    next.push(nm);
                }
            }
        }
        frontier = next;
    }
    let mut preds: BTreeMap<Mask, Vec<Vec<Comparison>>> =
        runs.iter().map(|(m, r)| (*m, vec![r.clone()])).collect();
    let size = |d: &Vec<Vec<Comparison>>| d.iter().map(Vec::len).sum::<usize>();
    loop {
        let mut changed = false;
        let snapshot: Vec<(Mask, Vec<Vec<Comparison>>)> =
            preds.iter().map(|(m, d)| (*m, d.clone())).collect();
        for (m, d) in &snapshot {
            for (rm, r) in &runs {
                let nm = m | rm;
                let cost = size(d) + r.len();
                if cost <= MAX_LEAVES && preds.get(&nm).is_none_or(|e| size(e) > cost) {
                    let mut nd = d.clone();
                    nd.push(r.clone());
                    preds.insert(nm, nd);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    for dnf in preds.values() {
        let mut leaves = Vec::new();
        let mut connectors = Vec::new();
        for (ri, run) in dnf.iter().enumerate() {
            for (li, leaf) in run.iter().enumerate() {
                if !leaves.is_empty() {
                    connectors.push(if li == 0 && ri > 0 {
                        BoolOp::Or
                    } else {
                        BoolOp::And
                    });
                }
                leaves.push(leaf.clone());
            }
        }
        let candidate = Query {
            filter: Some(Predicate { leaves, connectors }),
            lenient: Vec::new(),
            ..shape.clone()
        };
        if reference_passes(&candidate, p) {
            return Some(candidate);
        }
    }
    None
}

/// The structural part of a submission the enumerator keeps fixed.
pub fn shape_of(q: &Query) -> Query {
    Query {
        filter: None,
        lenient: Vec::new(),
        order_by: q.order_by.clone(),
        ..q.clone()
    }
}

pub fn order_by(column: &str, direction: Direction) -> OrderBy {
    OrderBy {
        column: column.into(),
        direction,
    }
}
