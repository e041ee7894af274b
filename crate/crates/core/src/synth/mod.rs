//! Hole-based synthesis of WHERE clauses.
//!
//! A [`HoleQuery`] is a query with some constants, operators, columns or
//! connectors replaced by typed holes. [`solve`] searches finite candidate
//! domains for an [`Assignment`] that makes every pair of a problem pass.
//! The stage functions in this module build hole queries from a concrete
//! query and return the substituted result.
//!
//! Domains are derived from the data: an `Int` constant compared against
//! column `c` ranges over the values of `c` in every source plus one value
//! below the minimum and one above the maximum; a `Str` constant ranges over
//! the values of `c` plus a string that occurs in no source. Every row subset
//! a single comparison can select is reachable from these domains.

mod search;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use crate::eval::{EvalError, Plan};
use crate::query::{BoolOp, CmpOp, Operand, Query, Side};
use crate::table::{tables_equal, ColumnType, ProblemSpec, Value};

pub use search::solve;
pub use stages::{
    remove_clauses, synth_clauses, synth_columns, synth_constants, synth_operators, Synthesized,
    MAX_LEAVES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HoleKind {
    /// A constant compared against a column. The type is that of the
    /// original constant; when the column is itself a hole the domain
    /// follows whichever column is chosen.
    Const(ColumnType),
    /// A comparison operator over operands of the given type.
    Op(ColumnType),
    /// A column of the source table.
    Col,
    /// `AND` or `OR`.
    Bop,
}

/// Where in the base query a hole sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HoleSite {
    Operand {
        leaf: usize,
        side: Side,
    },
    Op {
        leaf: usize,
    },
    /// Connector between leaf `index` and leaf `index + 1`.
    Connector {
        index: usize,
    },
}

impl HoleSite {
    pub fn leaf(self) -> Option<usize> {
        match self {
            HoleSite::Operand { leaf, .. } | HoleSite::Op { leaf } => Some(leaf),
            HoleSite::Connector { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HoleValue {
    Const(Value),
    Op(CmpOp),
    Col(String),
    Bop(BoolOp),
}

impl fmt::Display for HoleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HoleValue::Const(v) => Operand::from(v.clone()).fmt(f),
            HoleValue::Op(op) => op.fmt(f),
            HoleValue::Col(c) => f.write_str(c),
            HoleValue::Bop(b) => b.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hole {
    pub id: usize,
    pub kind: HoleKind,
    pub site: HoleSite,
    /// Value the hole replaced, if it abstracts an existing token.
    pub original: Option<HoleValue>,
}

/// A query with holes. Leaves added by clause synthesis are present in
/// `base` as placeholders whose every part is a hole.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoleQuery {
    pub base: Query,
    pub holes: Vec<Hole>,
}

impl HoleQuery {
    /// A query without holes.
    pub fn closed(base: Query) -> Self {
        HoleQuery {
            base,
            holes: Vec::new(),
        }
    }

    /// Writes the assigned values into the base query. Holes without a
    /// value keep whatever the base holds at their site.
    pub fn substitute(&self, assignment: &Assignment) -> Query {
        let mut q = self.base.clone();
        for hole in &self.holes {
            let Some(value) = assignment.get(hole.id) else {
                continue;
            };
            apply(&mut q, hole.site, value);
        }
        q
    }

    fn hole_at(&self, site: HoleSite) -> Option<&Hole> {
        self.holes.iter().find(|h| h.site == site)
    }
}

fn apply(q: &mut Query, site: HoleSite, value: &HoleValue) {
    let pred = q.filter.as_mut().expect("hole outside WHERE");
    match (site, value) {
        (HoleSite::Operand { leaf, side }, HoleValue::Const(v)) => {
            *pred.leaves[leaf].operand_mut(side) = Operand::from(v.clone());
        }
        (HoleSite::Operand { leaf, side }, HoleValue::Col(c)) => {
            *pred.leaves[leaf].operand_mut(side) = Operand::Column(c.clone());
        }
        (HoleSite::Op { leaf }, HoleValue::Op(op)) => pred.leaves[leaf].op = *op,
        (HoleSite::Connector { index }, HoleValue::Bop(b)) => pred.connectors[index] = *b,
        (site, value) => panic!("value {value} does not fit hole site {site:?}"),
    }
}

/// Renders holes as `CONST_i`, `OP_i`, `COL_i` and `BOP_i`, numbered per
/// kind in site order.
impl fmt::Display for HoleQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: BTreeMap<HoleSite, String> = BTreeMap::new();
        let mut counts = [0usize; 4];
        let mut ordered: Vec<&Hole> = self.holes.iter().collect();
        ordered.sort_by_key(|h| site_order(h.site));
        for hole in ordered {
            let (slot, prefix) = match hole.kind {
                HoleKind::Const(_) => (0, "CONST"),
                HoleKind::Op(_) => (1, "OP"),
                HoleKind::Col => (2, "COL"),
                HoleKind::Bop => (3, "BOP"),
            };
            counts[slot] += 1;
            names.insert(hole.site, format!("{prefix}_{}", counts[slot]));
        }

        let mut q = self.base.clone();
        q.filter = None;
        let head = q.to_string();
        let Some(pred) = &self.base.filter else {
            return f.write_str(&head);
        };
        let (before_order, order) = match head.find(" ORDER BY ") {
            Some(i) => head.split_at(i),
            None => (head.as_str(), ""),
        };
        write!(f, "{before_order} WHERE ")?;
        for (i, leaf) in pred.leaves.iter().enumerate() {
            if i > 0 {
                let site = HoleSite::Connector { index: i - 1 };
                match names.get(&site) {
                    Some(name) => write!(f, " {name} ")?,
                    None => write!(f, " {} ", pred.connectors[i - 1])?,
                }
            }
            let lhs = HoleSite::Operand {
                leaf: i,
                side: Side::Lhs,
            };
            let op = HoleSite::Op { leaf: i };
            let rhs = HoleSite::Operand {
                leaf: i,
                side: Side::Rhs,
            };
            let part =
                |site: HoleSite, concrete: String| names.get(&site).cloned().unwrap_or(concrete);
            write!(
                f,
                "{} {} {}",
                part(lhs, leaf.lhs.to_string()),
                part(op, leaf.op.to_string()),
                part(rhs, leaf.rhs.to_string())
            )?;
        }
        f.write_str(order)
    }
}

/// Left-to-right position of a site in the printed predicate.
pub(crate) fn site_order(site: HoleSite) -> (usize, usize) {
    match site {
        HoleSite::Connector { index } => (index + 1, 0),
        HoleSite::Operand {
            leaf,
            side: Side::Lhs,
        } => (leaf, 1),
        HoleSite::Op { leaf } => (leaf, 2),
        HoleSite::Operand {
            leaf,
            side: Side::Rhs,
        } => (leaf, 3),
    }
}

/// Values for the holes of a [`HoleQuery`], keyed by hole id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    values: BTreeMap<usize, HoleValue>,
}

impl Assignment {
    pub fn get(&self, id: usize) -> Option<&HoleValue> {
        self.values.get(&id)
    }

    pub fn insert(&mut self, id: usize, value: HoleValue) {
        self.values.insert(id, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &HoleValue)> {
        self.values.iter().map(|(&id, v)| (id, v))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveVerdict {
    Sat(Assignment),
    Unsat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("synthesis budget exceeded")]
pub struct BudgetExceeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("no assignment satisfies every pair")]
    Unsat,
    #[error("synthesis budget exceeded")]
    BudgetExceeded,
}

impl From<BudgetExceeded> for SynthError {
    fn from(_: BudgetExceeded) -> Self {
        SynthError::BudgetExceeded
    }
}

/// Time limits for one repair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub overall: Duration,
    pub per_solve: Duration,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            overall: Duration::from_secs(10),
            per_solve: Duration::from_secs(2),
        }
    }
}

impl Budget {
    pub fn with_overall(overall: Duration) -> Self {
        Budget {
            overall,
            per_solve: Budget::default().per_solve.min(overall),
        }
    }

    pub fn start(self) -> Timer {
        let start = Instant::now();
        Timer {
            start,
            deadline: start + self.overall,
            per_solve: self.per_solve,
        }
    }
}

/// A started [`Budget`].
#[derive(Clone, Copy, Debug)]
pub struct Timer {
    start: Instant,
    deadline: Instant,
    per_solve: Duration,
}

impl Timer {
    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    pub fn expired(&self) -> bool {
        Instant::now() >= self.deadline
    }

    /// Deadline for a solve call started now.
    pub(crate) fn solve_deadline(&self) -> Instant {
        (Instant::now() + self.per_solve).min(self.deadline)
    }
}

/// True when `q` maps every source of `problem` onto its destination.
pub fn check(q: &Query, problem: &ProblemSpec) -> Result<bool, EvalError> {
    let plan = Plan::compile(q, problem.source_schema())?;
    Ok(problem
        .pairs
        .iter()
        .all(|pair| tables_equal(&plan.run(&pair.source), &pair.destination, pair.ordered)))
}
