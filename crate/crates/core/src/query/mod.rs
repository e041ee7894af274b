//! Abstract syntax for the supported SELECT subset.
//!
//! The grammar covers a single-table `SELECT [DISTINCT] ... FROM t
//! [WHERE ...] [ORDER BY c [ASC|DESC]]` with a flat predicate: a list of
//! comparisons joined by `AND`/`OR`, where `AND` binds tighter. Parentheses,
//! joins, grouping and arithmetic are rejected by the parser.
//!
//! The parser is lenient: C/Java habits such as `==`, `&&`, `||`,
//! double-quoted strings and unquoted string literals are accepted and
//! recorded in [`Query::lenient`] so that the rewrite stage can fix them.
//! A query with a non-empty lenient list cannot be printed.

pub mod lex;
mod parse;
mod print;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_lenient, ParseFailure};
pub use print::{print, RenderError};

use crate::table::{ColumnType, Value};

/// A parsed query.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub distinct: bool,
    pub select: SelectList,
    pub table: String,
    pub filter: Option<Predicate>,
    pub order_by: Option<OrderBy>,
    /// Non-standard tokens accepted while parsing, in token order.
    pub lenient: Vec<LenientToken>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SelectList {
    Star,
    Items(Vec<SelectItem>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SelectItem {
    pub column: String,
    pub alias: Option<String>,
}

impl SelectItem {
    pub fn column(name: impl Into<String>) -> Self {
        SelectItem {
            column: name.into(),
            alias: None,
        }
    }

    pub fn aliased(name: impl Into<String>, alias: impl Into<String>) -> Self {
        SelectItem {
            column: name.into(),
            alias: Some(alias.into()),
        }
    }

    /// The column name this item produces in the output table.
    pub fn output_name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.column)
    }
}

/// Flat predicate: `leaves[0] connectors[0] leaves[1] ...`.
///
/// Evaluation follows SQL precedence, so the list is a disjunction of
/// `AND`-runs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub leaves: Vec<Comparison>,
    pub connectors: Vec<BoolOp>,
}

impl Predicate {
    pub fn single(leaf: Comparison) -> Self {
        Predicate {
            leaves: vec![leaf],
            connectors: Vec::new(),
        }
    }

    /// Groups leaf indices into the `AND`-runs that are OR-ed together.
    pub fn and_runs(&self) -> Vec<Vec<usize>> {
        let mut runs = vec![vec![0]];
        for (i, bop) in self.connectors.iter().enumerate() {
            match bop {
                BoolOp::And => runs.last_mut().expect("non-empty").push(i + 1),
                BoolOp::Or => runs.push(vec![i + 1]),
            }
        }
        runs
    }

    /// Removes leaf `index` together with the connector that joined it to
    /// its predecessor (or successor, for the first leaf).
    pub fn without_leaf(&self, index: usize) -> Option<Predicate> {
        if self.leaves.len() <= 1 {
            return None;
        }
        let mut leaves = self.leaves.clone();
        let mut connectors = self.connectors.clone();
        leaves.remove(index);
        connectors.remove(index.saturating_sub(1));
        Some(Predicate { leaves, connectors })
    }

    /// Keeps only the given leaves (ascending indices). Each kept leaf
    /// other than the first keeps the connector that preceded it.
    pub fn retain(&self, keep: &[usize]) -> Predicate {
        let leaves = keep.iter().map(|&i| self.leaves[i].clone()).collect();
        let connectors = keep
            .iter()
            .skip(1)
            .map(|&i| self.connectors[i - 1])
            .collect();
        Predicate { leaves, connectors }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl Comparison {
    pub fn new(lhs: Operand, op: CmpOp, rhs: Operand) -> Self {
        Comparison { lhs, op, rhs }
    }

    pub fn operand(&self, side: Side) -> &Operand {
        match side {
            Side::Lhs => &self.lhs,
            Side::Rhs => &self.rhs,
        }
    }

    pub fn operand_mut(&mut self, side: Side) -> &mut Operand {
        match side {
            Side::Lhs => &mut self.lhs,
            Side::Rhs => &mut self.rhs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Lhs,
    Rhs,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Lhs => Side::Rhs,
            Side::Rhs => Side::Lhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Column(String),
    Int(i64),
    Str(String),
    /// Unquoted word in value position, pending string repair.
    Bare(String),
}

impl Operand {
    pub fn column(name: impl Into<String>) -> Self {
        Operand::Column(name.into())
    }

    pub fn str(s: impl Into<String>) -> Self {
        Operand::Str(s.into())
    }

    pub fn column_name(&self) -> Option<&str> {
        match self {
            Operand::Column(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Operand::Int(_) | Operand::Str(_))
    }

    pub fn as_value(&self) -> Option<Value> {
        match self {
            Operand::Int(i) => Some(Value::Int(*i)),
            Operand::Str(s) => Some(Value::Str(s.clone())),
            _ => None,
        }
    }

    pub fn literal_type(&self) -> Option<ColumnType> {
        match self {
            Operand::Int(_) => Some(ColumnType::Int),
            Operand::Str(_) => Some(ColumnType::Str),
            _ => None,
        }
    }
}

impl From<Value> for Operand {
    fn from(v: Value) -> Self {
        match v {
            Value::Int(i) => Operand::Int(i),
            Value::Str(s) => Operand::Str(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];
    pub const EQUALITY: [CmpOp; 2] = [CmpOp::Eq, CmpOp::Ne];

    /// Operators available for a comparison over values of `ty`.
    pub fn for_type(ty: ColumnType) -> &'static [CmpOp] {
        match ty {
            ColumnType::Int => &Self::ALL,
            ColumnType::Str => &Self::EQUALITY,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoolOp {
    And,
    Or,
}

impl fmt::Display for BoolOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoolOp::And => "AND",
            BoolOp::Or => "OR",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[default]
    Asc,
    Desc,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OrderBy {
    pub column: String,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LenientKind {
    DoubleEq,
    AmpAmp,
    PipePipe,
    DoubleQuotedString,
    BareToken,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LenientToken {
    pub kind: LenientKind,
    /// Index of the token in the lexed input.
    pub position: usize,
    /// Source text of the token.
    pub text: String,
}

impl Query {
    /// Minimal `SELECT * FROM table`.
    pub fn star(table: impl Into<String>) -> Self {
        Query {
            distinct: false,
            select: SelectList::Star,
            table: table.into(),
            filter: None,
            order_by: None,
            lenient: Vec::new(),
        }
    }

    pub fn is_strict(&self) -> bool {
        self.lenient.is_empty()
    }

    pub fn has_lenient(&self, kind: LenientKind) -> bool {
        self.lenient.iter().any(|t| t.kind == kind)
    }

    pub fn leaf_count(&self) -> usize {
        self.filter.as_ref().map_or(0, |p| p.leaves.len())
    }

    /// Turns bare words that name one of `columns` into column references.
    ///
    /// The parser cannot tell `a = b` (two columns) from `a = US` (an
    /// unquoted string) without a schema; this resolves the former. It does
    /// not count as a repair.
    pub fn bind_columns<'a, I>(&mut self, columns: I) -> bool
    where
        I: IntoIterator<Item = &'a str> + Clone,
    {
        let Some(pred) = self.filter.as_mut() else {
            return false;
        };
        let mut bound = Vec::new();
        for leaf in &mut pred.leaves {
            for side in [Side::Lhs, Side::Rhs] {
                let operand = leaf.operand_mut(side);
                if let Operand::Bare(word) = operand {
                    if columns.clone().into_iter().any(|c| c == word) {
                        bound.push(word.clone());
                        *operand = Operand::Column(word.clone());
                    }
                }
            }
        }
        if bound.is_empty() {
            return false;
        }
        for word in bound {
            if let Some(pos) = self
                .lenient
                .iter()
                .position(|t| t.kind == LenientKind::BareToken && t.text == word)
            {
                self.lenient.remove(pos);
            }
        }
        true
    }
}
